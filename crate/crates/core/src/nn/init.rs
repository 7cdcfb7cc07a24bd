//! Weight initialization.

use crate::scalar::Scalar;
use crate::tensor::Tensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Glorot/Xavier uniform: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
///
/// Draws happen in f64 so f32 and f64 graphs built from the same seed
/// hold the same weights up to rounding.
pub fn glorot_uniform<T: Scalar>(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut ChaCha8Rng,
) -> Tensor<T> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let len: usize = shape.iter().product();
    let data: Vec<T> = (0..len)
        .map(|_| T::from_f64_lossy(rng.gen_range(-a..a)))
        .collect();
    Tensor::from_vec(shape, data).expect("volume matches by construction")
}
