//! Loss heads. Each returns the batch-mean loss together with the
//! gradient with respect to the network output it consumes, which is
//! then fed to `Graph::backward` as a seed.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Probabilities are clamped into [CLAMP, 1 - CLAMP] before any log.
pub const CLAMP: f64 = 1e-7;

/// Fused-gradient entries below this are written as exact zeros, so a
/// head that matches its target to rounding error contributes no
/// gradient instead of residue the optimizer would renormalize into
/// full-size steps.
const GRAD_FLUSH: f64 = 1e-9;

/// Binary cross-entropy over predicted probabilities `p` (any shape,
/// one value per sample) and targets `y` in {0, 1}.
pub fn bce_loss<T: Scalar>(p: &Tensor<T>, y: &[T]) -> Result<(T, Tensor<T>)> {
    if p.len() != y.len() {
        return Err(Error::shape(format!(
            "{} predictions vs {} targets",
            p.len(),
            y.len()
        )));
    }
    if p.is_empty() {
        return Err(Error::shape("empty batch"));
    }
    let lo = T::from_f64_lossy(CLAMP);
    let hi = T::one() - lo;
    let inv_b = T::one() / T::from_f64_lossy(p.len() as f64);
    let mut loss = T::zero();
    let mut grad = Tensor::zeros(p.shape());
    for (i, (&pi, &yi)) in p.data().iter().zip(y).enumerate() {
        let pc = pi.max(lo).min(hi);
        loss -= yi * pc.ln() + (T::one() - yi) * (T::one() - pc).ln();
        grad.data_mut()[i] = (-yi / pc + (T::one() - yi) / (T::one() - pc)) * inv_b;
    }
    Ok((loss * inv_b, grad))
}

/// Binary cross-entropy gradient taken at the sigmoid *input*: the
/// fused form (p - y) / B. Training seeds backward here rather than at
/// the probability, because the chained route multiplies by p(1 - p),
/// which rounds to zero once the head saturates; the fused form keeps
/// full magnitude on a saturated-wrong prediction and is exactly zero
/// on a converged one.
pub fn bce_logit_grad<T: Scalar>(p: &Tensor<T>, y: &[T]) -> Result<Tensor<T>> {
    if p.len() != y.len() {
        return Err(Error::shape(format!(
            "{} predictions vs {} targets",
            p.len(),
            y.len()
        )));
    }
    if p.is_empty() {
        return Err(Error::shape("empty batch"));
    }
    let inv_b = T::one() / T::from_f64_lossy(p.len() as f64);
    let flush = T::from_f64_lossy(GRAD_FLUSH);
    let mut grad = Tensor::zeros(p.shape());
    for (i, (&pi, &yi)) in p.data().iter().zip(y).enumerate() {
        let diff = pi - yi;
        grad.data_mut()[i] = if diff.abs() < flush {
            T::zero()
        } else {
            diff * inv_b
        };
    }
    Ok(grad)
}

/// Categorical cross-entropy over softmax outputs `q` of shape [B, K]
/// with integer class targets.
pub fn cce_loss<T: Scalar>(q: &Tensor<T>, y: &[usize]) -> Result<(T, Tensor<T>)> {
    if q.shape().len() != 2 {
        return Err(Error::shape(format!(
            "class probabilities must be [B, K], got {:?}",
            q.shape()
        )));
    }
    let (batch, k) = (q.shape()[0], q.shape()[1]);
    if batch != y.len() {
        return Err(Error::shape(format!("{batch} rows vs {} targets", y.len())));
    }
    if batch == 0 {
        return Err(Error::shape("empty batch"));
    }
    let lo = T::from_f64_lossy(CLAMP);
    let inv_b = T::one() / T::from_f64_lossy(batch as f64);
    let mut loss = T::zero();
    let mut grad = Tensor::zeros(q.shape());
    for (s, &ys) in y.iter().enumerate() {
        if ys >= k {
            return Err(Error::config(format!("class label {ys} outside 0..{k}")));
        }
        let qc = q.data()[s * k + ys].max(lo);
        loss -= qc.ln();
        grad.data_mut()[s * k + ys] = -inv_b / qc;
    }
    Ok((loss * inv_b, grad))
}

/// Categorical cross-entropy gradient at the softmax input, the fused
/// form (q - onehot) / B, with the same saturation rationale as
/// [`bce_logit_grad`].
pub fn cce_logit_grad<T: Scalar>(q: &Tensor<T>, y: &[usize]) -> Result<Tensor<T>> {
    if q.shape().len() != 2 {
        return Err(Error::shape(format!(
            "class probabilities must be [B, K], got {:?}",
            q.shape()
        )));
    }
    let (batch, k) = (q.shape()[0], q.shape()[1]);
    if batch != y.len() {
        return Err(Error::shape(format!("{batch} rows vs {} targets", y.len())));
    }
    if batch == 0 {
        return Err(Error::shape("empty batch"));
    }
    let inv_b = T::one() / T::from_f64_lossy(batch as f64);
    let flush = T::from_f64_lossy(GRAD_FLUSH);
    let mut grad = Tensor::zeros(q.shape());
    for (s, &ys) in y.iter().enumerate() {
        if ys >= k {
            return Err(Error::config(format!("class label {ys} outside 0..{k}")));
        }
        for c in 0..k {
            let onehot = if c == ys { T::one() } else { T::zero() };
            let diff = q.data()[s * k + c] - onehot;
            grad.data_mut()[s * k + c] = if diff.abs() < flush {
                T::zero()
            } else {
                diff * inv_b
            };
        }
    }
    Ok(grad)
}

/// Contrastive loss over embedding distances `d` (shape [B]) and pair
/// labels `same` (1 when both windows carry the same class, else 0):
///
///   mean( same * d^2 + (1 - same) * max(margin - d, 0) )
pub fn contrastive_loss<T: Scalar>(
    d: &Tensor<T>,
    same: &[T],
    margin: T,
) -> Result<(T, Tensor<T>)> {
    if d.len() != same.len() {
        return Err(Error::shape(format!(
            "{} distances vs {} pair labels",
            d.len(),
            same.len()
        )));
    }
    if d.is_empty() {
        return Err(Error::shape("empty batch"));
    }
    let inv_b = T::one() / T::from_f64_lossy(d.len() as f64);
    let mut loss = T::zero();
    let mut grad = Tensor::zeros(d.shape());
    for (i, (&di, &si)) in d.data().iter().zip(same).enumerate() {
        if di < T::zero() {
            return Err(Error::numeric(format!("negative distance {di} at row {i}")));
        }
        let hinge = (margin - di).max(T::zero());
        loss += si * di * di + (T::one() - si) * hinge;
        let mut g = si * (di + di);
        if hinge > T::zero() {
            g -= T::one() - si;
        }
        grad.data_mut()[i] = g * inv_b;
    }
    Ok((loss * inv_b, grad))
}
