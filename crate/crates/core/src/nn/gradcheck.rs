//! Central-difference verification of the reverse pass.
//!
//! The checker perturbs individual coordinates, so on big graphs it
//! samples a seeded subset per tensor instead of sweeping every value.
//! Run it with dropout-free (eval mode) forwards only; stochastic
//! masks would make the two loss evaluations incomparable.

use crate::error::Result;
use crate::nn::graph::{Forward, Graph, Mode, NodeId};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug)]
pub struct GradCheckConfig {
    pub eps: f64,
    /// Coordinates checked per tensor; exhaustive when it covers the
    /// whole tensor.
    pub budget: usize,
    pub seed: u64,
    /// Relative error denominators are floored here so coordinates
    /// where both gradients are tiny do not blow up the ratio.
    pub floor: f64,
    pub check_inputs: bool,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            eps: 1e-5,
            budget: 24,
            seed: 0,
            floor: 1e-2,
            check_inputs: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub worst: String,
}

fn pick_coords(rng: &mut ChaCha8Rng, len: usize, budget: usize) -> Vec<usize> {
    if budget >= len {
        (0..len).collect()
    } else {
        rand::seq::index::sample(rng, len, budget).into_vec()
    }
}

/// Compare analytic parameter gradients (and optionally input
/// gradients) against central differences of the supplied loss.
///
/// The closure maps a cached forward pass to the scalar loss and the
/// seed gradients that drive `Graph::backward`.
pub fn grad_check<T, F>(
    graph: &mut Graph<T>,
    inputs: &[&Tensor<T>],
    loss: F,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport>
where
    T: Scalar,
    F: Fn(&Forward<T>) -> Result<(T, Vec<(NodeId, Tensor<T>)>)>,
{
    let mut owned_inputs: Vec<Tensor<T>> = inputs.iter().map(|t| (*t).clone()).collect();

    let eval =
        |graph: &Graph<T>, ins: &[Tensor<T>]| -> Result<T> {
            let refs: Vec<&Tensor<T>> = ins.iter().collect();
            let fwd = graph.forward(&refs, Mode::Eval, None)?;
            Ok(loss(&fwd)?.0)
        };

    let refs: Vec<&Tensor<T>> = owned_inputs.iter().collect();
    let fwd = graph.forward(&refs, Mode::Eval, None)?;
    let (_, seeds) = loss(&fwd)?;
    let grads = graph.backward(&fwd, &seeds)?;
    drop(refs);

    let eps = T::from_f64_lossy(cfg.eps);
    let two_eps = cfg.eps * 2.0;
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_err: 0.0,
        worst: String::new(),
    };
    let note = |report: &mut GradCheckReport, fd: f64, an: f64, what: String| {
        let rel = (fd - an).abs() / (fd.abs().max(an.abs())).max(cfg.floor);
        report.checked += 1;
        if rel > report.max_rel_err {
            report.max_rel_err = rel;
            report.worst = format!("{what}: fd {fd:.3e} vs analytic {an:.3e}");
        }
    };

    let param_ids: Vec<_> = graph.params.ids().collect();
    for (idx, id) in param_ids.into_iter().enumerate() {
        let len = graph.params.get(id).len();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(idx as u64));
        for coord in pick_coords(&mut rng, len, cfg.budget) {
            let old = graph.params.get(id).data()[coord];
            graph.params.get_mut(id).data_mut()[coord] = old + eps;
            let lp = eval(graph, &owned_inputs)?;
            graph.params.get_mut(id).data_mut()[coord] = old - eps;
            let lm = eval(graph, &owned_inputs)?;
            graph.params.get_mut(id).data_mut()[coord] = old;
            let fd = (lp.to_f64_lossy() - lm.to_f64_lossy()) / two_eps;
            let an = grads.params[idx].data()[coord].to_f64_lossy();
            note(
                &mut report,
                fd,
                an,
                format!("param {}[{coord}]", graph.params.name(id)),
            );
        }
    }

    if cfg.check_inputs {
        for slot in 0..owned_inputs.len() {
            let len = owned_inputs[slot].len();
            let mut rng = ChaCha8Rng::seed_from_u64(
                cfg.seed.wrapping_add(0x1000_0000).wrapping_add(slot as u64),
            );
            for coord in pick_coords(&mut rng, len, cfg.budget) {
                let old = owned_inputs[slot].data()[coord];
                owned_inputs[slot].data_mut()[coord] = old + eps;
                let lp = eval(graph, &owned_inputs)?;
                owned_inputs[slot].data_mut()[coord] = old - eps;
                let lm = eval(graph, &owned_inputs)?;
                owned_inputs[slot].data_mut()[coord] = old;
                let fd = (lp.to_f64_lossy() - lm.to_f64_lossy()) / two_eps;
                let an = grads.inputs[slot]
                    .as_ref()
                    .map(|t| t.data()[coord].to_f64_lossy())
                    .unwrap_or(0.0);
                note(&mut report, fd, an, format!("input {slot}[{coord}]"));
            }
        }
    }

    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::loss::bce_loss;
    use rand::Rng;

    /// Two dense layers with a relu between and a sigmoid head; every
    /// coordinate checked against central differences.
    #[test]
    fn dense_stack_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut g: Graph<f64> = Graph::new();
        let x = g.input();
        let h = g.dense(x, "h", 6, 5, &mut rng).unwrap();
        let h = g.relu(h).unwrap();
        let o = g.dense(h, "o", 5, 1, &mut rng).unwrap();
        let p = g.sigmoid(o).unwrap();

        let input = Tensor::from_vec(
            &[3, 6],
            (0..18).map(|i| ((i * 37 % 19) as f64 - 9.0) / 6.0).collect(),
        )
        .unwrap();
        let targets = [1.0, 0.0, 1.0];
        let cfg = GradCheckConfig {
            budget: usize::MAX,
            check_inputs: true,
            ..GradCheckConfig::default()
        };
        let report = grad_check(
            &mut g,
            &[&input],
            |fwd| {
                let probs = fwd.value(p).reshape(&[3])?;
                let (l, grad) = bce_loss(&probs, &targets)?;
                Ok((l, vec![(p, grad.reshape(&[3, 1])?)]))
            },
            &cfg,
        )
        .unwrap();
        assert!(
            report.max_rel_err < 1e-7,
            "max rel err {} at {}",
            report.max_rel_err,
            report.worst
        );
        assert_eq!(report.checked, 6 * 5 + 5 + 5 + 1 + 18);
    }

    /// Raw convolution case: a 2x5x7 input under 3 kernels of shape
    /// 2x3x3, with gradients for kernel, bias, and the input itself all
    /// verified against central differences.
    #[test]
    fn conv_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut g: Graph<f64> = Graph::new();
        let x = g.input();
        let y = g
            .conv2d(x, "c", 2, 3, (3, 3), (1, 1), (0, 0), &mut rng)
            .unwrap();

        let input = Tensor::from_vec(
            &[1, 2, 5, 7],
            (0..70).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        // Weighted sum over the conv output keeps every coordinate of
        // the gradient informative.
        let weights = Tensor::from_vec(
            &[1, 3, 3, 5],
            (0..45).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();

        let cfg = GradCheckConfig {
            budget: usize::MAX,
            check_inputs: true,
            ..GradCheckConfig::default()
        };
        let w = weights.clone();
        let report = grad_check(
            &mut g,
            &[&input],
            move |fwd| {
                let out = fwd.value(y);
                let mut loss = 0.0;
                for (a, b) in out.data().iter().zip(w.data()) {
                    loss += a * b;
                }
                Ok((loss, vec![(y, w.clone())]))
            },
            &cfg,
        )
        .unwrap();
        assert!(
            report.max_rel_err < 1e-6,
            "max rel err {} at {}",
            report.max_rel_err,
            report.worst
        );
        assert_eq!(report.checked, 3 * 2 * 3 * 3 + 3 + 70);
    }

    /// Strided, padded convolution feeding a pooled sigmoid head, with
    /// a dropout node that eval mode must neutralize.
    #[test]
    fn strided_padded_conv_stack_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut g: Graph<f64> = Graph::new();
        let x = g.input();
        let c = g
            .conv2d(x, "c", 1, 2, (3, 5), (1, 2), (1, 1), &mut rng)
            .unwrap();
        let r = g.relu(c).unwrap();
        let d = g.dropout(r, 0.5).unwrap();
        let m = g.maxpool2d(d, (2, 2)).unwrap();
        let f = g.flatten(m).unwrap();
        // [1,1,6,9] -> conv pad(1,1) stride(1,2) -> [2,6,4] ->
        // pool 2x2 -> [2,3,2] -> 12 values.
        let o = g.dense(f, "o", 12, 1, &mut rng).unwrap();
        let p = g.sigmoid(o).unwrap();

        let input = Tensor::from_vec(
            &[1, 1, 6, 9],
            (0..54).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let cfg = GradCheckConfig {
            budget: usize::MAX,
            check_inputs: true,
            ..GradCheckConfig::default()
        };
        let report = grad_check(
            &mut g,
            &[&input],
            |fwd| {
                let probs = fwd.value(p).reshape(&[1])?;
                let (l, grad) = bce_loss(&probs, &[1.0])?;
                Ok((l, vec![(p, grad.reshape(&[1, 1])?)]))
            },
            &cfg,
        )
        .unwrap();
        assert!(
            report.max_rel_err < 1e-6,
            "max rel err {} at {}",
            report.max_rel_err,
            report.worst
        );
    }

    #[test]
    fn sampling_respects_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut g: Graph<f64> = Graph::new();
        let x = g.input();
        let o = g.dense(x, "o", 30, 1, &mut rng).unwrap();
        let p = g.sigmoid(o).unwrap();
        let input = Tensor::from_vec(&[1, 30], (0..30).map(|i| i as f64 / 30.0).collect()).unwrap();
        let cfg = GradCheckConfig {
            budget: 7,
            ..GradCheckConfig::default()
        };
        let report = grad_check(
            &mut g,
            &[&input],
            |fwd| {
                let probs = fwd.value(p).reshape(&[1])?;
                let (l, grad) = bce_loss(&probs, &[0.0])?;
                Ok((l, vec![(p, grad.reshape(&[1, 1])?)]))
            },
            &cfg,
        )
        .unwrap();
        // 7 of the 30 weights, plus the whole 1-value bias.
        assert_eq!(report.checked, 8);
    }
}
