//! Iterative radix-2 FFT for power-of-two lengths.
//!
//! Twiddle factors are evaluated in f64 and narrowed to the working
//! scalar type, so the f32 path keeps the accuracy of its element type
//! rather than compounding table error.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// In-place forward DFT of the complex sequence `re + i*im`.
///
/// Uses the engineering sign convention `X[k] = sum_n x[n] exp(-2*pi*i*k*n/N)`.
pub fn fft_in_place<T: Scalar>(re: &mut [T], im: &mut [T]) -> Result<()> {
    let n = re.len();
    if im.len() != n {
        return Err(Error::shape(format!(
            "fft buffers disagree: {} vs {}",
            n,
            im.len()
        )));
    }
    if !n.is_power_of_two() {
        return Err(Error::numeric(format!("fft length {} not a power of two", n)));
    }
    if n <= 1 {
        return Ok(());
    }

    // Bit-reversal permutation.
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            re.swap(i, j);
            im.swap(i, j);
        }
    }

    // Twiddle table for the largest stage; smaller stages stride through it.
    let half = n / 2;
    let mut wre = Vec::with_capacity(half);
    let mut wim = Vec::with_capacity(half);
    for k in 0..half {
        let ang = -2.0 * std::f64::consts::PI * (k as f64) / (n as f64);
        wre.push(T::from_f64_lossy(ang.cos()));
        wim.push(T::from_f64_lossy(ang.sin()));
    }

    let mut len = 2;
    while len <= n {
        let stride = n / len;
        let half_len = len / 2;
        for start in (0..n).step_by(len) {
            for k in 0..half_len {
                let wr = wre[k * stride];
                let wi = wim[k * stride];
                let a = start + k;
                let b = a + half_len;
                let tr = wr * re[b] - wi * im[b];
                let ti = wr * im[b] + wi * re[b];
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
            }
        }
        len <<= 1;
    }
    Ok(())
}

/// One-sided power spectrum |X[k]|^2 for k = 0..=fft_size/2.
///
/// The frame is zero-padded (or must be shorter than or equal to
/// `fft_size`); no window is applied here.
pub fn power_spectrum<T: Scalar>(frame: &[T], fft_size: usize) -> Result<Vec<T>> {
    if frame.len() > fft_size {
        return Err(Error::shape(format!(
            "frame of {} samples exceeds fft size {}",
            frame.len(),
            fft_size
        )));
    }
    let mut re = vec![T::zero(); fft_size];
    let mut im = vec![T::zero(); fft_size];
    re[..frame.len()].copy_from_slice(frame);
    fft_in_place(&mut re, &mut im)?;
    Ok((0..=fft_size / 2)
        .map(|k| re[k] * re[k] + im[k] * im[k])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Textbook O(N^2) DFT, kept deliberately naive as the reference.
    fn naive_dft(x: &[f64]) -> Vec<(f64, f64)> {
        let n = x.len();
        (0..n)
            .map(|k| {
                let mut acc = (0.0, 0.0);
                for (idx, &v) in x.iter().enumerate() {
                    let ang = -2.0 * std::f64::consts::PI * (k * idx) as f64 / n as f64;
                    acc.0 += v * ang.cos();
                    acc.1 += v * ang.sin();
                }
                acc
            })
            .collect()
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let mut re = vec![0.0f64; 8];
        let mut im = vec![0.0f64; 8];
        re[0] = 1.0;
        fft_in_place(&mut re, &mut im).unwrap();
        for k in 0..8 {
            assert!((re[k] - 1.0).abs() < 1e-12);
            assert!(im[k].abs() < 1e-12);
        }
    }

    #[test]
    fn matches_naive_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..256).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let want = naive_dft(&x);
        let mut re = x.clone();
        let mut im = vec![0.0f64; 256];
        fft_in_place(&mut re, &mut im).unwrap();
        let scale: f64 = want
            .iter()
            .map(|c| c.0.hypot(c.1))
            .fold(1.0f64, f64::max);
        for k in 0..256 {
            assert!((re[k] - want[k].0).abs() / scale < 1e-12, "bin {k} real");
            assert!((im[k] - want[k].1).abs() / scale < 1e-12, "bin {k} imag");
        }
    }

    #[test]
    fn parseval_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..128).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let time_energy: f64 = x.iter().map(|v| v * v).sum();
        let mut re = x.clone();
        let mut im = vec![0.0f64; 128];
        fft_in_place(&mut re, &mut im).unwrap();
        let freq_energy: f64 =
            re.iter().zip(&im).map(|(r, i)| r * r + i * i).sum::<f64>() / 128.0;
        assert!((time_energy - freq_energy).abs() / time_energy < 1e-12);
    }

    #[test]
    fn rejects_non_power_of_two() {
        let mut re = vec![0.0f64; 12];
        let mut im = vec![0.0f64; 12];
        assert!(fft_in_place(&mut re, &mut im).is_err());
    }

    #[test]
    fn f32_path_tracks_f64() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut re64 = x.clone();
        let mut im64 = vec![0.0f64; 64];
        fft_in_place(&mut re64, &mut im64).unwrap();
        let mut re32: Vec<f32> = x.iter().map(|&v| v as f32).collect();
        let mut im32 = vec![0.0f32; 64];
        fft_in_place(&mut re32, &mut im32).unwrap();
        for k in 0..64 {
            assert!((re32[k] as f64 - re64[k]).abs() < 1e-4);
            assert!((im32[k] as f64 - im64[k]).abs() < 1e-4);
        }
    }
}
