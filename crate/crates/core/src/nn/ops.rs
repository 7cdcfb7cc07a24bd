//! Raw per-sample kernels for convolution and pooling.
//!
//! These operate on flat slices with explicit geometry so the graph
//! layer stays free of index arithmetic. Convolution is
//! cross-correlation (no kernel flip), the convention every deep
//! learning stack uses.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug)]
pub struct ConvGeom {
    pub c_in: usize,
    pub h_in: usize,
    pub w_in: usize,
    pub c_out: usize,
    pub kh: usize,
    pub kw: usize,
    pub sh: usize,
    pub sw: usize,
    pub ph: usize,
    pub pw: usize,
    pub h_out: usize,
    pub w_out: usize,
}

impl ConvGeom {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        c_in: usize,
        h_in: usize,
        w_in: usize,
        c_out: usize,
        kh: usize,
        kw: usize,
        stride: (usize, usize),
        padding: (usize, usize),
    ) -> Result<Self> {
        let (sh, sw) = stride;
        let (ph, pw) = padding;
        if sh == 0 || sw == 0 {
            return Err(Error::shape("zero convolution stride"));
        }
        if kh > h_in + 2 * ph || kw > w_in + 2 * pw {
            return Err(Error::shape(format!(
                "kernel {kh}x{kw} larger than padded input {}x{}",
                h_in + 2 * ph,
                w_in + 2 * pw
            )));
        }
        Ok(ConvGeom {
            c_in,
            h_in,
            w_in,
            c_out,
            kh,
            kw,
            sh,
            sw,
            ph,
            pw,
            h_out: (h_in + 2 * ph - kh) / sh + 1,
            w_out: (w_in + 2 * pw - kw) / sw + 1,
        })
    }

    pub fn kernel_len(&self) -> usize {
        self.c_out * self.c_in * self.kh * self.kw
    }

    pub fn in_len(&self) -> usize {
        self.c_in * self.h_in * self.w_in
    }

    pub fn out_len(&self) -> usize {
        self.c_out * self.h_out * self.w_out
    }

    /// Output range `lo..hi` whose taps fall inside the unpadded input,
    /// for one kernel offset along an axis.
    fn valid_range(k: usize, pad: usize, stride: usize, in_len: usize, out_len: usize) -> (usize, usize) {
        // in = out*stride + k - pad must lie in [0, in_len)
        let lo = if pad > k {
            (pad - k).div_ceil(stride)
        } else {
            0
        };
        let max_in = in_len as i64 - 1 + pad as i64 - k as i64;
        if max_in < 0 {
            return (0, 0);
        }
        let hi = ((max_in as usize) / stride + 1).min(out_len);
        (lo.min(hi), hi)
    }
}

/// x: [c_in, h_in, w_in], kernel: [c_out, c_in, kh, kw], bias: [c_out],
/// out: [c_out, h_out, w_out] (overwritten).
pub fn conv2d_forward<T: Scalar>(x: &[T], kernel: &[T], bias: &[T], g: &ConvGeom, out: &mut [T]) {
    debug_assert_eq!(x.len(), g.in_len());
    debug_assert_eq!(kernel.len(), g.kernel_len());
    debug_assert_eq!(out.len(), g.out_len());
    let plane_out = g.h_out * g.w_out;
    let plane_in = g.h_in * g.w_in;
    for co in 0..g.c_out {
        let dst = &mut out[co * plane_out..(co + 1) * plane_out];
        dst.iter_mut().for_each(|v| *v = bias[co]);
        for ci in 0..g.c_in {
            let src = &x[ci * plane_in..(ci + 1) * plane_in];
            for kh in 0..g.kh {
                let (oh_lo, oh_hi) = ConvGeom::valid_range(kh, g.ph, g.sh, g.h_in, g.h_out);
                for kw in 0..g.kw {
                    let k = kernel[((co * g.c_in + ci) * g.kh + kh) * g.kw + kw];
                    let (ow_lo, ow_hi) = ConvGeom::valid_range(kw, g.pw, g.sw, g.w_in, g.w_out);
                    for oh in oh_lo..oh_hi {
                        let ih = oh * g.sh + kh - g.ph;
                        let out_row = oh * g.w_out;
                        if g.sw == 1 {
                            let iw0 = ow_lo + kw - g.pw;
                            let s = &src[ih * g.w_in + iw0..ih * g.w_in + iw0 + (ow_hi - ow_lo)];
                            let d = &mut dst[out_row + ow_lo..out_row + ow_hi];
                            for (dv, sv) in d.iter_mut().zip(s) {
                                *dv += k * *sv;
                            }
                        } else {
                            for ow in ow_lo..ow_hi {
                                let iw = ow * g.sw + kw - g.pw;
                                dst[out_row + ow] += k * src[ih * g.w_in + iw];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Gradients of the same map. dx, dk, db are accumulated into.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward<T: Scalar>(
    x: &[T],
    kernel: &[T],
    g: &ConvGeom,
    dout: &[T],
    dx: &mut [T],
    dk: &mut [T],
    db: &mut [T],
) {
    let plane_out = g.h_out * g.w_out;
    let plane_in = g.h_in * g.w_in;
    for co in 0..g.c_out {
        let gout = &dout[co * plane_out..(co + 1) * plane_out];
        let mut bias_acc = T::zero();
        for &v in gout {
            bias_acc += v;
        }
        db[co] += bias_acc;
        for ci in 0..g.c_in {
            let src = &x[ci * plane_in..(ci + 1) * plane_in];
            let dsrc = &mut dx[ci * plane_in..(ci + 1) * plane_in];
            for kh in 0..g.kh {
                let (oh_lo, oh_hi) = ConvGeom::valid_range(kh, g.ph, g.sh, g.h_in, g.h_out);
                for kw in 0..g.kw {
                    let kidx = ((co * g.c_in + ci) * g.kh + kh) * g.kw + kw;
                    let k = kernel[kidx];
                    let (ow_lo, ow_hi) = ConvGeom::valid_range(kw, g.pw, g.sw, g.w_in, g.w_out);
                    let mut k_acc = T::zero();
                    for oh in oh_lo..oh_hi {
                        let ih = oh * g.sh + kh - g.ph;
                        let out_row = oh * g.w_out;
                        for ow in ow_lo..ow_hi {
                            let iw = ow * g.sw + kw - g.pw;
                            let gv = gout[out_row + ow];
                            k_acc += gv * src[ih * g.w_in + iw];
                            dsrc[ih * g.w_in + iw] += k * gv;
                        }
                    }
                    dk[kidx] += k_acc;
                }
            }
        }
    }
}

/// Non-overlapping max pooling; window == stride.
/// argmax records, per output element, the flat input index that won.
pub fn maxpool_forward<T: Scalar>(
    x: &[T],
    c: usize,
    h: usize,
    w: usize,
    ph: usize,
    pw: usize,
    out: &mut [T],
    argmax: &mut [usize],
) {
    let h_out = h / ph;
    let w_out = w / pw;
    debug_assert_eq!(out.len(), c * h_out * w_out);
    for ch in 0..c {
        for oh in 0..h_out {
            for ow in 0..w_out {
                let mut best_idx = ch * h * w + (oh * ph) * w + ow * pw;
                let mut best = x[best_idx];
                for dh in 0..ph {
                    for dw in 0..pw {
                        let idx = ch * h * w + (oh * ph + dh) * w + ow * pw + dw;
                        if x[idx] > best {
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                }
                let o = ch * h_out * w_out + oh * w_out + ow;
                out[o] = best;
                argmax[o] = best_idx;
            }
        }
    }
}
