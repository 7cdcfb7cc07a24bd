//! Adam updates plus the max-norm weight constraint.

use crate::error::{Error, Result};
use crate::nn::graph::{Gradients, ParamId, Params};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment accumulators, one pair per parameter tensor.
pub struct AdamState<T> {
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &Params<T>) -> Self {
        let m = params
            .ids()
            .map(|id| Tensor::zeros(params.get(id).shape()))
            .collect::<Vec<_>>();
        let v = m.clone();
        AdamState { m, v, step: 0 }
    }

    /// One optimizer step. If any gradient value is non-finite the
    /// whole step is rejected and no parameter changes.
    pub fn apply(
        &mut self,
        params: &mut Params<T>,
        grads: &Gradients<T>,
        cfg: &AdamConfig,
    ) -> Result<()> {
        if grads.params.len() != self.m.len() {
            return Err(Error::shape("gradient count does not match optimizer state"));
        }
        for g in &grads.params {
            if !g.all_finite() {
                return Err(Error::numeric(
                    "non-finite gradient, optimizer step rejected",
                ));
            }
        }
        self.step += 1;
        let b1 = T::from_f64_lossy(cfg.beta1);
        let b2 = T::from_f64_lossy(cfg.beta2);
        let lr = T::from_f64_lossy(cfg.lr);
        let eps = T::from_f64_lossy(cfg.eps);
        let one = T::one();
        // 1 - beta^t, computed in f64 to keep long runs accurate.
        let c1 = T::from_f64_lossy(1.0 - cfg.beta1.powi(self.step as i32));
        let c2 = T::from_f64_lossy(1.0 - cfg.beta2.powi(self.step as i32));
        for (idx, id) in params.ids().collect::<Vec<_>>().into_iter().enumerate() {
            let g = grads.params[idx].data();
            let m = self.m[idx].data_mut();
            let v = self.v[idx].data_mut();
            let p = params.get_mut(id).data_mut();
            for i in 0..g.len() {
                m[i] = b1 * m[i] + (one - b1) * g[i];
                v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Rescale each output filter of a kernel so its L2 norm is at most `c`.
/// The tensor is viewed as [rows, rest] with one row per leading-axis
/// entry.
pub fn maxnorm_project<T: Scalar>(params: &mut Params<T>, id: ParamId, c: f64) {
    let t = params.get_mut(id);
    let shape = t.shape().to_vec();
    if shape.is_empty() {
        return;
    }
    let rows = shape[0];
    let row_len: usize = shape[1..].iter().product::<usize>().max(1);
    let cap = T::from_f64_lossy(c);
    for r in 0..rows {
        let row = &mut t.data_mut()[r * row_len..(r + 1) * row_len];
        let mut sq = T::zero();
        for v in row.iter() {
            sq += *v * *v;
        }
        let norm = sq.sqrt();
        if norm > cap {
            let scale = cap / norm;
            for v in row.iter_mut() {
                *v *= scale;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_param(values: Vec<f64>) -> Params<f64> {
        let mut p = Params::new();
        let shape = vec![values.len()];
        p.add("w", Tensor::from_vec(&shape, values).unwrap());
        p
    }

    fn grads_for(params: &Params<f64>, g: Vec<f64>) -> Gradients<f64> {
        assert_eq!(params.len(), 1);
        Gradients {
            params: vec![Tensor::from_vec(&[g.len()], g).unwrap()],
            inputs: vec![],
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut params = one_param(vec![1.0, -2.0, 3.0]);
        let mut state = AdamState::new(&params);
        let grads = grads_for(&params, vec![0.0, 0.0, 0.0]);
        state.apply(&mut params, &grads, &AdamConfig::default()).unwrap();
        assert_eq!(
            params.get(crate::nn::graph::ParamId(0)).data(),
            &[1.0, -2.0, 3.0]
        );
    }

    #[test]
    fn first_step_has_closed_form() {
        // After bias correction the very first update reduces to
        // -lr * g / (|g| + eps).
        let g0 = [0.3f64, -1.7, 0.0002];
        let mut params = one_param(vec![0.5, 0.5, 0.5]);
        let mut state = AdamState::new(&params);
        let cfg = AdamConfig::default();
        let grads = grads_for(&params, g0.to_vec());
        state.apply(&mut params, &grads, &cfg).unwrap();
        for (i, &g) in g0.iter().enumerate() {
            let expect = 0.5 - cfg.lr * g / (g.abs() + cfg.eps);
            let got = params.get(crate::nn::graph::ParamId(0)).data()[i];
            assert!(
                (got - expect).abs() < 1e-9,
                "coord {i}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn non_finite_gradient_rejects_step_untouched() {
        let mut params = one_param(vec![1.0, 2.0]);
        let mut state = AdamState::new(&params);
        let grads = grads_for(&params, vec![0.1, f64::NAN]);
        let err = state.apply(&mut params, &grads, &AdamConfig::default());
        assert!(err.is_err());
        assert_eq!(state.step, 0);
        assert_eq!(params.get(crate::nn::graph::ParamId(0)).data(), &[1.0, 2.0]);
    }

    #[test]
    fn descends_a_quadratic() {
        // f(x) = sum x^2, gradient 2x; a few hundred steps should get
        // close to the minimum from any moderate start.
        let mut params = one_param(vec![1.3, -0.7, 2.1]);
        let mut state = AdamState::new(&params);
        let cfg = AdamConfig {
            lr: 0.05,
            ..AdamConfig::default()
        };
        for _ in 0..400 {
            let x = params.get(crate::nn::graph::ParamId(0)).data().to_vec();
            let grads = grads_for(&params, x.iter().map(|v| 2.0 * v).collect());
            state.apply(&mut params, &grads, &cfg).unwrap();
        }
        let f: f64 = params
            .get(crate::nn::graph::ParamId(0))
            .data()
            .iter()
            .map(|v| v * v)
            .sum();
        assert!(f < 1e-4, "residual {f}");
    }

    #[test]
    fn maxnorm_scales_long_rows_to_cap() {
        let mut params = Params::new();
        let id = params.add(
            "k",
            Tensor::from_vec(&[2, 4], vec![1.0, 1.0, 1.0, 1.0, 0.1, 0.0, 0.0, 0.0]).unwrap(),
        );
        maxnorm_project(&mut params, id, 0.4);
        let t = params.get(id);
        let r0: f64 = t.data()[..4].iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((r0 - 0.4).abs() < 1e-12);
        // Short row untouched.
        assert_eq!(&t.data()[4..], &[0.1, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn maxnorm_is_idempotent_and_never_grows_norms() {
        let mut params = Params::new();
        let id = params.add(
            "k",
            Tensor::from_vec(&[3, 2], vec![3.0, 4.0, 0.3, 0.1, -1.0, 1.0]).unwrap(),
        );
        let before: Vec<f64> = (0..3)
            .map(|r| {
                params.get(id).data()[r * 2..r * 2 + 2]
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        maxnorm_project(&mut params, id, 0.4);
        let once = params.get(id).data().to_vec();
        for r in 0..3 {
            let n: f64 = once[r * 2..r * 2 + 2].iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(n <= 0.4 + 1e-12);
            assert!(n <= before[r] + 1e-12);
        }
        maxnorm_project(&mut params, id, 0.4);
        assert_eq!(params.get(id).data(), once.as_slice());
    }
}
