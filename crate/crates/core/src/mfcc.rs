//! MFCC feature maps for EEG windows.
//!
//! A 10 s window sampled at 256 Hz becomes, per channel, a 13 x 201
//! matrix: 201 overlapping frames, 13 cepstral coefficients each. The
//! full window is the stack over channels, shape [C x 13 x 201].
//!
//! Pipeline per frame: periodic Hann window, |FFT|^2 power spectrum,
//! triangular mel filterbank energies, ln(energy + epsilon), orthonormal
//! type-II DCT, first `n_coeffs` coefficients.

use crate::error::{Error, Result};
use crate::fft::power_spectrum;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

/// Additive floor inside the log, guarding empty bands.
pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MfccConfig {
    pub n_banks: usize,
    pub n_coeffs: usize,
    /// Lower band edge in Hz.
    pub fmin: f64,
    /// Requested upper band edge in Hz; clamped to fs/2 when the
    /// filterbank is built.
    pub fmax: f64,
    pub frame_len: usize,
    pub hop: usize,
    pub fft_size: usize,
    /// First-difference pre-emphasis coefficient; 0 disables it.
    pub preemphasis: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            n_banks: 13,
            n_coeffs: 13,
            fmin: 0.0,
            fmax: 128.0,
            frame_len: 160,
            hop: 12,
            fft_size: 256,
            preemphasis: 0.0,
        }
    }
}

impl MfccConfig {
    pub fn validate(&self, fs: f64) -> Result<()> {
        if self.n_banks == 0 || self.n_coeffs == 0 || self.n_coeffs > self.n_banks {
            return Err(Error::config(format!(
                "need 1 <= n_coeffs <= n_banks, got {} and {}",
                self.n_coeffs, self.n_banks
            )));
        }
        if self.hop == 0 || self.frame_len == 0 {
            return Err(Error::config("frame_len and hop must be positive"));
        }
        if !self.fft_size.is_power_of_two() || self.fft_size < self.frame_len {
            return Err(Error::config(format!(
                "fft_size {} must be a power of two >= frame_len {}",
                self.fft_size, self.frame_len
            )));
        }
        let fmax = self.fmax.min(fs / 2.0);
        if !(self.fmin >= 0.0 && self.fmin < fmax) {
            return Err(Error::config(format!(
                "band edges fmin={} fmax={} (clamped to {}) are not ordered",
                self.fmin, self.fmax, fmax
            )));
        }
        Ok(())
    }

    pub fn n_frames(&self, signal_len: usize) -> Result<usize> {
        if signal_len < self.frame_len {
            return Err(Error::shape(format!(
                "signal of {} samples shorter than frame_len {}",
                signal_len, self.frame_len
            )));
        }
        Ok((signal_len - self.frame_len) / self.hop + 1)
    }
}

/// MFCC tensor for one window plus a provenance tag.
#[derive(Clone, Debug)]
pub struct FeatureMap<T> {
    /// Shape [channels, n_coeffs, n_frames].
    pub values: Tensor<T>,
    pub window_id: Option<String>,
}

/// Hertz to mel, HTK variant in natural log form.
pub fn mel(f: f64) -> f64 {
    1127.0 * (1.0 + f / 700.0).ln()
}

/// Mel back to hertz.
pub fn mel_inv(m: f64) -> f64 {
    700.0 * ((m / 1127.0).exp() - 1.0)
}

/// Periodic Hann window: w[n] = 0.5 - 0.5 cos(2 pi n / len).
pub fn hann_window<T: Scalar>(len: usize) -> Vec<T> {
    (0..len)
        .map(|n| {
            let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos();
            T::from_f64_lossy(w)
        })
        .collect()
}

/// Slice a channel into Hann-windowed frames, shape [n_frames, frame_len].
pub fn frame_signal<T: Scalar>(channel: &[T], cfg: &MfccConfig) -> Result<Tensor<T>> {
    let n_frames = cfg.n_frames(channel.len())?;
    let window = hann_window::<T>(cfg.frame_len);
    let mut data = Vec::with_capacity(n_frames * cfg.frame_len);
    for i in 0..n_frames {
        let start = i * cfg.hop;
        for (s, w) in channel[start..start + cfg.frame_len].iter().zip(&window) {
            data.push(*s * *w);
        }
    }
    Tensor::from_vec(&[n_frames, cfg.frame_len], data)
}

/// Triangular mel filterbank, shape [n_banks, fft_size/2 + 1].
///
/// Band edges are `n_banks + 2` points equally spaced on the mel scale
/// between fmin and min(fmax, fs/2); each row is the triangle evaluated
/// at the FFT bin centers k * fs / fft_size.
pub fn mel_filterbank<T: Scalar>(cfg: &MfccConfig, fs: f64) -> Result<Tensor<T>> {
    cfg.validate(fs)?;
    let fmax = cfg.fmax.min(fs / 2.0);
    let n_bins = cfg.fft_size / 2 + 1;
    let lo = mel(cfg.fmin);
    let hi = mel(fmax);
    let edges: Vec<f64> = (0..cfg.n_banks + 2)
        .map(|i| mel_inv(lo + (hi - lo) * i as f64 / (cfg.n_banks + 1) as f64))
        .collect();
    let mut data = vec![T::zero(); cfg.n_banks * n_bins];
    for b in 0..cfg.n_banks {
        let (left, center, right) = (edges[b], edges[b + 1], edges[b + 2]);
        for k in 0..n_bins {
            let f = k as f64 * fs / cfg.fft_size as f64;
            let w = if f >= left && f <= center {
                (f - left) / (center - left)
            } else if f > center && f <= right {
                (right - f) / (right - center)
            } else {
                0.0
            };
            data[b * n_bins + k] = T::from_f64_lossy(w);
        }
    }
    Tensor::from_vec(&[cfg.n_banks, n_bins], data)
}

/// Orthonormal type-II DCT, truncated to the first `n_coeffs` outputs.
pub fn dct2_orthonormal<T: Scalar>(x: &[T], n_coeffs: usize) -> Vec<T> {
    let n = x.len();
    let mut out = Vec::with_capacity(n_coeffs);
    for k in 0..n_coeffs {
        let mut acc = T::zero();
        for (i, &v) in x.iter().enumerate() {
            let ang = std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64;
            acc += v * T::from_f64_lossy(ang.cos());
        }
        let scale = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        out.push(acc * T::from_f64_lossy(scale));
    }
    out
}

/// MFCCs for one channel, shape [n_coeffs, n_frames].
pub fn mfcc_channel<T: Scalar>(channel: &[T], cfg: &MfccConfig, fs: f64) -> Result<Tensor<T>> {
    let filterbank = mel_filterbank::<T>(cfg, fs)?;
    let n_bins = cfg.fft_size / 2 + 1;

    let emphasized;
    let samples: &[T] = if cfg.preemphasis != 0.0 {
        let a = T::from_f64_lossy(cfg.preemphasis);
        let mut v = channel.to_vec();
        for i in (1..v.len()).rev() {
            v[i] = v[i] - a * v[i - 1];
        }
        emphasized = v;
        &emphasized
    } else {
        channel
    };

    let frames = frame_signal(samples, cfg)?;
    let n_frames = frames.shape()[0];
    let floor = T::from_f64_lossy(LOG_FLOOR);
    let mut out = Tensor::zeros(&[cfg.n_coeffs, n_frames]);
    let mut log_energies = vec![T::zero(); cfg.n_banks];
    for t in 0..n_frames {
        let frame = &frames.data()[t * cfg.frame_len..(t + 1) * cfg.frame_len];
        let power = power_spectrum(frame, cfg.fft_size)?;
        for b in 0..cfg.n_banks {
            let row = &filterbank.data()[b * n_bins..(b + 1) * n_bins];
            let mut e = T::zero();
            for (w, p) in row.iter().zip(&power) {
                e += *w * *p;
            }
            log_energies[b] = (e + floor).ln();
        }
        let coeffs = dct2_orthonormal(&log_energies, cfg.n_coeffs);
        for (k, c) in coeffs.into_iter().enumerate() {
            out.data_mut()[k * n_frames + t] = c;
        }
    }
    Ok(out)
}

/// Full feature map for a [C, L] window, shape [C, n_coeffs, n_frames].
pub fn mfcc_map<T: Scalar>(window: &Tensor<T>, cfg: &MfccConfig, fs: f64) -> Result<FeatureMap<T>> {
    if window.shape().len() != 2 {
        return Err(Error::shape(format!(
            "expected [channels, samples], got {:?}",
            window.shape()
        )));
    }
    if !window.all_finite() {
        return Err(Error::numeric("window contains non-finite samples"));
    }
    let channels = window.shape()[0];
    let per_channel: Vec<Tensor<T>> = (0..channels)
        .map(|c| {
            let row = window.index_axis0(c);
            mfcc_channel(row.data(), cfg, fs)
        })
        .collect::<Result<_>>()?;
    let refs: Vec<&Tensor<T>> = per_channel.iter().collect();
    Ok(FeatureMap {
        values: Tensor::stack(&refs)?,
        window_id: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const FS: f64 = 256.0;

    // ---- slow reference implementation, written from the definition ----

    fn ref_power(frame: &[f64], fft_size: usize) -> Vec<f64> {
        (0..=fft_size / 2)
            .map(|k| {
                let mut re = 0.0;
                let mut im = 0.0;
                for (n, &v) in frame.iter().enumerate() {
                    let ang = -2.0 * std::f64::consts::PI * (k * n) as f64 / fft_size as f64;
                    re += v * ang.cos();
                    im += v * ang.sin();
                }
                re * re + im * im
            })
            .collect()
    }

    fn ref_filterbank(cfg: &MfccConfig, fs: f64) -> Vec<Vec<f64>> {
        let to_mel = |f: f64| 1127.0 * (1.0 + f / 700.0).ln();
        let from_mel = |m: f64| 700.0 * ((m / 1127.0).exp() - 1.0);
        let fmax = cfg.fmax.min(fs / 2.0);
        let step = (to_mel(fmax) - to_mel(cfg.fmin)) / (cfg.n_banks + 1) as f64;
        let pts: Vec<f64> = (0..cfg.n_banks + 2)
            .map(|i| from_mel(to_mel(cfg.fmin) + step * i as f64))
            .collect();
        (0..cfg.n_banks)
            .map(|b| {
                (0..=cfg.fft_size / 2)
                    .map(|k| {
                        let f = k as f64 * fs / cfg.fft_size as f64;
                        if f >= pts[b] && f <= pts[b + 1] {
                            (f - pts[b]) / (pts[b + 1] - pts[b])
                        } else if f > pts[b + 1] && f <= pts[b + 2] {
                            (pts[b + 2] - f) / (pts[b + 2] - pts[b + 1])
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect()
    }

    fn ref_mfcc(channel: &[f64], cfg: &MfccConfig, fs: f64) -> Vec<Vec<f64>> {
        let bank = ref_filterbank(cfg, fs);
        let n_frames = (channel.len() - cfg.frame_len) / cfg.hop + 1;
        let mut rows = vec![vec![0.0; n_frames]; cfg.n_coeffs];
        for t in 0..n_frames {
            let frame: Vec<f64> = (0..cfg.frame_len)
                .map(|n| {
                    let w = 0.5
                        - 0.5
                            * (2.0 * std::f64::consts::PI * n as f64 / cfg.frame_len as f64)
                                .cos();
                    channel[t * cfg.hop + n] * w
                })
                .collect();
            let power = ref_power(&frame, cfg.fft_size);
            let logs: Vec<f64> = bank
                .iter()
                .map(|row| {
                    let e: f64 = row.iter().zip(&power).map(|(w, p)| w * p).sum();
                    (e + LOG_FLOOR).ln()
                })
                .collect();
            let n = logs.len();
            for (k, row) in rows.iter_mut().enumerate() {
                let s = if k == 0 {
                    (1.0 / n as f64).sqrt()
                } else {
                    (2.0 / n as f64).sqrt()
                };
                row[t] = s * logs
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        v * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64
                            / (2 * n) as f64)
                            .cos()
                    })
                    .sum::<f64>();
            }
        }
        rows
    }

    // ---- tests ----

    #[test]
    fn frame_counts() {
        let cfg = MfccConfig::default();
        assert_eq!(cfg.n_frames(2560).unwrap(), 201);
        assert_eq!(cfg.n_frames(160).unwrap(), 1);
        assert!(cfg.n_frames(159).is_err());
    }

    #[test]
    fn frames_of_ones_equal_hann() {
        let cfg = MfccConfig::default();
        let ones = vec![1.0f64; 2560];
        let frames = frame_signal(&ones, &cfg).unwrap();
        let hann: Vec<f64> = hann_window(cfg.frame_len);
        for t in [0usize, 100, 200] {
            let row = &frames.data()[t * cfg.frame_len..(t + 1) * cfg.frame_len];
            for (a, b) in row.iter().zip(&hann) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mel_scale_values() {
        assert_eq!(mel(0.0), 0.0);
        let m700 = mel(700.0);
        assert!((m700 - 1127.0 * 2f64.ln()).abs() < 1e-9);
        assert!((m700 - 781.17).abs() < 0.01);
        assert!((mel_inv(m700) - 700.0).abs() < 1e-9);
    }

    #[test]
    fn filterbank_rows_are_triangles() {
        let cfg = MfccConfig::default();
        let bank = mel_filterbank::<f64>(&cfg, FS).unwrap();
        let n_bins = cfg.fft_size / 2 + 1;
        assert_eq!(bank.shape(), &[13, n_bins]);
        for b in 0..13 {
            let row = &bank.data()[b * n_bins..(b + 1) * n_bins];
            assert!(row.iter().all(|&w| w >= 0.0));
            assert_eq!(row[0], 0.0);
            assert_eq!(row[n_bins - 1], 0.0);
            let peak = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert!(peak > 0 && peak < n_bins - 1, "peak interior for bank {b}");
            for k in 1..=peak {
                assert!(row[k] >= row[k - 1] - 1e-15, "rising flank of bank {b}");
            }
            for k in peak + 1..n_bins {
                assert!(row[k] <= row[k - 1] + 1e-15, "falling flank of bank {b}");
            }
        }
    }

    #[test]
    fn fmax_clamps_to_nyquist() {
        let cfg = MfccConfig {
            fmax: 256.0,
            ..MfccConfig::default()
        };
        let bank = mel_filterbank::<f64>(&cfg, FS).unwrap();
        let clamped = mel_filterbank::<f64>(&MfccConfig::default(), FS).unwrap();
        assert_eq!(bank.data(), clamped.data());
    }

    #[test]
    fn silence_gives_constant_dct_of_log_floor() {
        let cfg = MfccConfig::default();
        let window = Tensor::<f64>::zeros(&[2, 2560]);
        let map = mfcc_map(&window, &cfg, FS).unwrap();
        assert_eq!(map.values.shape(), &[2, 13, 201]);
        let c0_expected = 13f64.sqrt() * LOG_FLOOR.ln();
        for c in 0..2 {
            let ch = map.values.index_axis0(c);
            for t in 0..201 {
                assert!((ch.data()[t] - c0_expected).abs() < 1e-9, "c0 at frame {t}");
                for k in 1..13 {
                    assert!(ch.data()[k * 201 + t].abs() < 1e-9, "c{k} at frame {t}");
                }
            }
        }
    }

    #[test]
    fn sine_concentrates_in_low_bands_and_is_stationary() {
        let cfg = MfccConfig::default();
        // Small amplitude keeps the spectral-leakage tails of the tone
        // below the log floor; the floor then pins the empty bands and
        // the coefficient trajectories are flat. At unit amplitude the
        // deep leakage nulls straddle the floor and jitter by a few
        // percent frame to frame.
        let signal: Vec<f64> = (0..2560)
            .map(|n| 1e-5 * (2.0 * std::f64::consts::PI * 8.0 * n as f64 / FS).sin())
            .collect();

        // Band energies for a middle frame.
        let frames = frame_signal(&signal, &cfg).unwrap();
        let frame = &frames.data()[100 * cfg.frame_len..101 * cfg.frame_len];
        let power = crate::fft::power_spectrum(frame, cfg.fft_size).unwrap();
        let bank = mel_filterbank::<f64>(&cfg, FS).unwrap();
        let n_bins = cfg.fft_size / 2 + 1;
        let energies: Vec<f64> = (0..13)
            .map(|b| {
                bank.data()[b * n_bins..(b + 1) * n_bins]
                    .iter()
                    .zip(&power)
                    .map(|(w, p)| w * p)
                    .sum()
            })
            .collect();
        let argmax = energies
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!(argmax <= 1, "8 Hz lands in the lowest bands, got bank {argmax}");
        let low: f64 = energies[..3].iter().sum();
        let high: f64 = energies[3..].iter().sum();
        assert!(low > 10.0 * high);

        // Coefficient trajectories settle after the first frame.
        let coeffs = mfcc_channel(&signal, &cfg, FS).unwrap();
        for k in 0..13 {
            let row = &coeffs.data()[k * 201..(k + 1) * 201];
            let base = row[1];
            if base.abs() < 0.5 {
                continue;
            }
            for (t, &v) in row.iter().enumerate().skip(1) {
                assert!(
                    ((v - base) / base).abs() < 0.01,
                    "coefficient {k} drifts at frame {t}: {v} vs {base}"
                );
            }
        }
    }

    #[test]
    fn amplitude_scaling_shifts_only_c0() {
        let cfg = MfccConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let signal: Vec<f64> = (0..2560).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let alpha = 3.0f64;
        let scaled: Vec<f64> = signal.iter().map(|v| v * alpha).collect();
        let a = mfcc_channel(&signal, &cfg, FS).unwrap();
        let b = mfcc_channel(&scaled, &cfg, FS).unwrap();
        let shift = 2.0 * alpha.ln() * 13f64.sqrt();
        for t in 0..201 {
            let da = b.data()[t] - a.data()[t];
            assert!((da - shift).abs() < 1e-6, "c0 shift at frame {t}: {da}");
            for k in 1..13 {
                let d = b.data()[k * 201 + t] - a.data()[k * 201 + t];
                assert!(d.abs() < 1e-6, "c{k} moved at frame {t}: {d}");
            }
        }
    }

    #[test]
    fn agrees_with_slow_reference() {
        let cfg = MfccConfig::default();
        for seed in [1u64, 2, 3] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let signal: Vec<f64> = (0..2560).map(|_| rng.gen_range(-50.0..50.0)).collect();
            let got = mfcc_channel(&signal, &cfg, FS).unwrap();
            let want = ref_mfcc(&signal, &cfg, FS);
            for k in 0..13 {
                for t in 0..201 {
                    let a = got.data()[k * 201 + t];
                    let b = want[k][t];
                    let rel = (a - b).abs() / a.abs().max(b.abs()).max(1.0);
                    assert!(rel < 1e-9, "coefficient {k} frame {t}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn full_map_shape() {
        let cfg = MfccConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data: Vec<f64> = (0..23 * 2560).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let window = Tensor::from_vec(&[23, 2560], data).unwrap();
        let map = mfcc_map(&window, &cfg, FS).unwrap();
        assert_eq!(map.values.shape(), &[23, 13, 201]);
        assert!(map.values.all_finite());
    }

    #[test]
    fn rejects_non_finite_input() {
        let cfg = MfccConfig::default();
        let mut data = vec![0.0f64; 2 * 2560];
        data[100] = f64::NAN;
        let window = Tensor::from_vec(&[2, 2560], data).unwrap();
        assert!(mfcc_map(&window, &cfg, FS).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = MfccConfig::default();
        cfg.fft_size = 100;
        assert!(cfg.validate(FS).is_err());
        let mut cfg = MfccConfig::default();
        cfg.fmin = 130.0;
        assert!(cfg.validate(FS).is_err());
    }
}
