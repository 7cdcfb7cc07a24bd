//! Channel-level Shapley attribution, prediction-trace smoothing, and
//! the KL-divergence biomarker map.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::train::WindowScorer;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Scores whole feature maps; the unit the Shapley estimator perturbs.
pub trait MapScorer<T: Scalar> {
    fn score_maps(&self, maps: &[&Tensor<T>]) -> Result<Vec<f64>>;
}

/// The models score maps by stacking them into one batch.
impl<T: Scalar> MapScorer<T> for crate::models::Model1<T> {
    fn score_maps(&self, maps: &[&Tensor<T>]) -> Result<Vec<f64>> {
        self.score_batch(&Tensor::stack(maps)?)
    }
}

impl<T: Scalar> MapScorer<T> for crate::models::Model2<T> {
    fn score_maps(&self, maps: &[&Tensor<T>]) -> Result<Vec<f64>> {
        self.score_batch(&Tensor::stack(maps)?)
    }
}

/// Adapter for closure-based scorers (toys, reduced models).
pub struct FnScorer<F>(pub F);

impl<T: Scalar, F: Fn(&Tensor<T>) -> Result<f64>> MapScorer<T> for FnScorer<F> {
    fn score_maps(&self, maps: &[&Tensor<T>]) -> Result<Vec<f64>> {
        maps.iter().map(|m| (self.0)(m)).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ShapleyReport {
    /// Signed per-channel contributions.
    pub signed: Vec<f64>,
    /// Absolute contributions, the published quantity.
    pub absolute: Vec<f64>,
    pub n_permutations: usize,
    pub n_evaluations: usize,
    pub seed: u64,
}

fn check_players<T: Scalar>(instance: &Tensor<T>, baseline: &Tensor<T>) -> Result<(usize, usize)> {
    if instance.shape() != baseline.shape() {
        return Err(Error::shape(format!(
            "instance {:?} vs baseline {:?}",
            instance.shape(),
            baseline.shape()
        )));
    }
    if instance.shape().is_empty() || instance.shape()[0] == 0 {
        return Err(Error::shape("attribution needs a leading channel axis"));
    }
    let c = instance.shape()[0];
    Ok((c, instance.len() / c))
}

fn finite(scores: &[f64]) -> Result<()> {
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::numeric("non-finite model output under masking"));
    }
    Ok(())
}

/// Monte Carlo permutation estimate of the Shapley value of each
/// channel. Masked channels take the baseline's values; each sampled
/// permutation contributes one marginal gain per channel.
///
/// `n_samples` counts marginal evaluations, so the estimator runs
/// ceil(n_samples / channels) full permutations.
pub fn channel_shapley<T: Scalar, S: MapScorer<T>>(
    scorer: &S,
    instance: &Tensor<T>,
    baseline: &Tensor<T>,
    n_samples: usize,
    seed: u64,
) -> Result<ShapleyReport> {
    let (c, stride) = check_players(instance, baseline)?;
    if n_samples < c {
        return Err(Error::config(format!(
            "n_samples = {n_samples} below the channel count {c}"
        )));
    }
    let n_perms = n_samples.div_ceil(c);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base_score = {
        let s = scorer.score_maps(&[baseline])?;
        finite(&s)?;
        s[0]
    };
    let mut signed = vec![0.0f64; c];
    let mut perm: Vec<usize> = (0..c).collect();
    let mut current = baseline.clone();
    for _ in 0..n_perms {
        perm.shuffle(&mut rng);
        current.data_mut().copy_from_slice(baseline.data());
        let mut maps = Vec::with_capacity(c);
        for &j in &perm {
            current.data_mut()[j * stride..(j + 1) * stride]
                .copy_from_slice(&instance.data()[j * stride..(j + 1) * stride]);
            maps.push(current.clone());
        }
        let refs: Vec<&Tensor<T>> = maps.iter().collect();
        let scores = scorer.score_maps(&refs)?;
        finite(&scores)?;
        let mut prev = base_score;
        for (k, &j) in perm.iter().enumerate() {
            signed[j] += scores[k] - prev;
            prev = scores[k];
        }
    }
    for v in &mut signed {
        *v /= n_perms as f64;
    }
    let absolute = signed.iter().map(|v| v.abs()).collect();
    Ok(ShapleyReport {
        signed,
        absolute,
        n_permutations: n_perms,
        n_evaluations: n_perms * c + 1,
        seed,
    })
}

/// Exact Shapley values by subset enumeration (2^C model calls);
/// usable on reduced toys, not the 23-channel maps.
pub fn shapley_exact<T: Scalar, S: MapScorer<T>>(
    scorer: &S,
    instance: &Tensor<T>,
    baseline: &Tensor<T>,
) -> Result<Vec<f64>> {
    let (c, stride) = check_players(instance, baseline)?;
    if c > 16 {
        return Err(Error::config(format!(
            "exact enumeration over {c} channels needs 2^{c} evaluations; use the sampled estimator"
        )));
    }
    let n_sub = 1usize << c;
    let mut subset_scores = vec![0.0f64; n_sub];
    let mut current = baseline.clone();
    // Score subsets in batches to keep model calls amortized.
    let mut pending: Vec<(usize, Tensor<T>)> = Vec::new();
    let flush = |pending: &mut Vec<(usize, Tensor<T>)>,
                 subset_scores: &mut Vec<f64>|
     -> Result<()> {
        if pending.is_empty() {
            return Ok(());
        }
        let refs: Vec<&Tensor<T>> = pending.iter().map(|(_, m)| m).collect();
        let scores = scorer.score_maps(&refs)?;
        finite(&scores)?;
        for ((mask, _), s) in pending.iter().zip(scores) {
            subset_scores[*mask] = s;
        }
        pending.clear();
        Ok(())
    };
    for mask in 0..n_sub {
        current.data_mut().copy_from_slice(baseline.data());
        for j in 0..c {
            if mask & (1 << j) != 0 {
                current.data_mut()[j * stride..(j + 1) * stride]
                    .copy_from_slice(&instance.data()[j * stride..(j + 1) * stride]);
            }
        }
        pending.push((mask, current.clone()));
        if pending.len() == 64 {
            flush(&mut pending, &mut subset_scores)?;
        }
    }
    flush(&mut pending, &mut subset_scores)?;

    let mut fact = vec![1.0f64; c + 1];
    for i in 1..=c {
        fact[i] = fact[i - 1] * i as f64;
    }
    let mut signed = vec![0.0f64; c];
    for j in 0..c {
        let bit = 1usize << j;
        for mask in 0..n_sub {
            if mask & bit != 0 {
                continue;
            }
            let s = mask.count_ones() as usize;
            let w = fact[s] * fact[c - 1 - s] / fact[c];
            signed[j] += w * (subset_scores[mask | bit] - subset_scores[mask]);
        }
    }
    Ok(signed)
}

/// Per-channel sum of absolute values of an elementwise attribution
/// map: collapses [C, ...] to a C-vector.
pub fn aggregate_elementwise<T: Scalar>(map: &Tensor<T>) -> Result<Vec<f64>> {
    if map.shape().is_empty() || map.shape()[0] == 0 {
        return Err(Error::shape("aggregation needs a leading channel axis"));
    }
    let c = map.shape()[0];
    let stride = map.len() / c;
    Ok((0..c)
        .map(|j| {
            map.data()[j * stride..(j + 1) * stride]
                .iter()
                .map(|v| v.to_f64_lossy().abs())
                .sum()
        })
        .collect())
}

/// Elementwise mean of a set of equally shaped maps; the default
/// masking baseline.
pub fn mean_map<T: Scalar>(maps: &[Tensor<T>]) -> Result<Tensor<T>> {
    let first = maps
        .first()
        .ok_or_else(|| Error::dataset("no maps to average"))?;
    let mut acc = vec![0.0f64; first.len()];
    for m in maps {
        if m.shape() != first.shape() {
            return Err(Error::shape("maps differ in shape"));
        }
        for (a, v) in acc.iter_mut().zip(m.data()) {
            *a += v.to_f64_lossy();
        }
    }
    let n = maps.len() as f64;
    let data: Vec<T> = acc.iter().map(|a| T::from_f64_lossy(a / n)).collect();
    Tensor::from_vec(first.shape(), data)
}

/// Attributions for a run of windows plus the estimator settings that
/// produced them.
#[derive(Clone, Debug, Serialize)]
pub struct AttributionMap {
    pub channels: usize,
    /// One absolute-contribution vector per instance, in window order.
    pub columns: Vec<Vec<f64>>,
    pub window_starts: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
    pub baseline: String,
}

// -- prediction smoothing ------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct PredictionTrace {
    pub raw: Vec<f64>,
    pub smoothed: Vec<f64>,
    /// 1 where smoothed >= threshold.
    pub decisions: Vec<u8>,
    pub threshold: f64,
    pub window_len: usize,
}

fn hann(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|i| {
            let x = 2.0 * std::f64::consts::PI * i as f64 / (len - 1) as f64;
            0.5 * (1.0 - x.cos())
        })
        .collect()
}

/// Smooth raw probabilities with a normalized Hann kernel (weights
/// renormalized over the valid overlap near the edges), then threshold.
pub fn smooth_and_threshold(
    raw: &[f64],
    window_len: usize,
    threshold: f64,
) -> Result<PredictionTrace> {
    if raw.is_empty() {
        return Err(Error::dataset("no predictions to smooth"));
    }
    if window_len == 0 || window_len % 2 == 0 {
        return Err(Error::config(format!(
            "smoothing window must be odd and positive, got {window_len}"
        )));
    }
    if window_len > 2 * raw.len() + 1 {
        return Err(Error::config(format!(
            "smoothing window {window_len} too wide for {} predictions",
            raw.len()
        )));
    }
    let kernel = hann(window_len);
    let half = window_len / 2;
    let n = raw.len();
    let mut smoothed = Vec::with_capacity(n);
    for t in 0..n {
        let mut num = 0.0;
        let mut den = 0.0;
        for (k, &w) in kernel.iter().enumerate() {
            let i = t as isize + k as isize - half as isize;
            if i < 0 || i >= n as isize {
                continue;
            }
            num += w * raw[i as usize];
            den += w;
        }
        smoothed.push(num / den);
    }
    let decisions = smoothed
        .iter()
        .map(|&s| if s >= threshold { 1 } else { 0 })
        .collect();
    Ok(PredictionTrace {
        raw: raw.to_vec(),
        smoothed,
        decisions,
        threshold,
        window_len,
    })
}

// -- KL biomarker map -----------------------------------------------------

pub const KL_SMOOTHING: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct KlMap {
    /// values[c][t] = KL(P_t || P_{t+1}) for channel c, in nats.
    pub values: Vec<Vec<f64>>,
    pub bins: usize,
    pub alpha: f64,
}

/// KL(p || q) in nats for two distributions over the same support;
/// q must be strictly positive (smoothed histograms are).
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum::<f64>()
        .max(0.0)
}

fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize, alpha: f64) -> Vec<f64> {
    let mut counts = vec![0.0f64; bins];
    if hi > lo {
        let scale = bins as f64 / (hi - lo);
        for &v in values {
            let b = (((v - lo) * scale) as usize).min(bins - 1);
            counts[b] += 1.0;
        }
    } else {
        // Degenerate range: everything lands in one bin.
        counts[0] = values.len() as f64;
    }
    let total: f64 = values.len() as f64 + alpha * bins as f64;
    for c in &mut counts {
        *c = (*c + alpha) / total;
    }
    counts
}

/// Per-channel histogram distributions over a window sequence and the
/// KL divergence between each consecutive pair. Bin ranges are fixed
/// per channel from the global min/max across the whole sequence.
pub fn kl_map<T: Scalar>(features: &[Tensor<T>], bins: usize) -> Result<KlMap> {
    if features.len() < 2 {
        return Err(Error::dataset(format!(
            "kl map needs at least 2 windows, got {}",
            features.len()
        )));
    }
    if bins == 0 {
        return Err(Error::config("bins must be positive"));
    }
    let shape = features[0].shape().to_vec();
    if shape.is_empty() || shape[0] == 0 {
        return Err(Error::shape("kl map needs a leading channel axis"));
    }
    for f in features {
        if f.shape() != shape {
            return Err(Error::shape("feature maps differ in shape"));
        }
    }
    let c = shape[0];
    let stride = features[0].len() / c;
    let n = features.len();
    let mut values = vec![vec![0.0f64; n - 1]; c];
    let mut chan = vec![0.0f64; stride];
    for (ch, row) in values.iter_mut().enumerate() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for f in features {
            for v in &f.data()[ch * stride..(ch + 1) * stride] {
                let x = v.to_f64_lossy();
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        let mut prev: Option<Vec<f64>> = None;
        for (t, f) in features.iter().enumerate() {
            for (dst, v) in chan.iter_mut().zip(&f.data()[ch * stride..(ch + 1) * stride]) {
                *dst = v.to_f64_lossy();
            }
            let hist = histogram(&chan, lo, hi, bins, KL_SMOOTHING);
            if let Some(p) = prev {
                row[t - 1] = kl_divergence(&p, &hist);
            }
            prev = Some(hist);
        }
    }
    Ok(KlMap {
        values,
        bins,
        alpha: KL_SMOOTHING,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn channel_means(map: &Tensor<f64>) -> Vec<f64> {
        let c = map.shape()[0];
        let stride = map.len() / c;
        (0..c)
            .map(|j| map.data()[j * stride..(j + 1) * stride].iter().sum::<f64>() / stride as f64)
            .collect()
    }

    fn random_map(shape: &[usize], seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..shape.iter().product::<usize>())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        Tensor::from_vec(shape, data).unwrap()
    }

    #[test]
    fn aggregate_zero_and_single_entry() {
        let zero: Tensor<f64> = Tensor::zeros(&[23, 13, 201]);
        assert_eq!(aggregate_elementwise(&zero).unwrap(), vec![0.0; 23]);

        let mut m: Tensor<f64> = Tensor::zeros(&[23, 13, 201]);
        m.data_mut()[5 * 13 * 201 + 7] = -2.0;
        let agg = aggregate_elementwise(&m).unwrap();
        assert_eq!(agg[5], 2.0);
        assert_eq!(agg.iter().sum::<f64>(), 2.0);
    }

    #[test]
    fn aggregate_matches_naive_double_loop() {
        let m = random_map(&[6, 4, 9], 1);
        let agg = aggregate_elementwise(&m).unwrap();
        for j in 0..6 {
            let mut naive = 0.0;
            for r in 0..4 {
                for col in 0..9 {
                    naive += m.data()[j * 36 + r * 9 + col].abs();
                }
            }
            assert!((agg[j] - naive).abs() < 1e-12);
            assert!(agg[j] >= 0.0);
        }
    }

    #[test]
    fn aggregate_is_channel_permutation_equivariant() {
        let m = random_map(&[5, 3, 4], 2);
        let agg = aggregate_elementwise(&m).unwrap();
        // Rotate the channels by two.
        let stride = 12;
        let mut rotated = vec![0.0; m.len()];
        for j in 0..5 {
            let src = &m.data()[j * stride..(j + 1) * stride];
            rotated[((j + 2) % 5) * stride..((j + 2) % 5 + 1) * stride].copy_from_slice(src);
        }
        let rot = Tensor::from_vec(&[5, 3, 4], rotated).unwrap();
        let agg_rot = aggregate_elementwise(&rot).unwrap();
        for j in 0..5 {
            assert_eq!(agg[j], agg_rot[(j + 2) % 5]);
        }
    }

    #[test]
    fn mean_map_averages_elementwise() {
        let a = Tensor::from_vec(&[2, 2], vec![0.0, 2.0, 4.0, 6.0]).unwrap();
        let b = Tensor::from_vec(&[2, 2], vec![2.0, 2.0, 0.0, -6.0]).unwrap();
        let m = mean_map(&[a, b]).unwrap();
        assert_eq!(m.data(), &[1.0, 2.0, 2.0, 0.0]);
        assert!(mean_map::<f64>(&[]).is_err());
    }

    #[test]
    fn shapley_null_player_gets_zero() {
        // The scorer never reads channel 5.
        let weights = [0.7, -0.4, 0.2, 0.9, -1.1, 0.0, 0.3, 0.5];
        let scorer = FnScorer(move |m: &Tensor<f64>| {
            let means = channel_means(m);
            let z: f64 = weights
                .iter()
                .zip(&means)
                .map(|(w, v)| w * v)
                .sum();
            Ok(1.0 / (1.0 + (-z).exp()))
        });
        let instance = random_map(&[8, 3, 5], 3);
        let baseline = Tensor::zeros(&[8, 3, 5]);
        let rep = channel_shapley(&scorer, &instance, &baseline, 5000, 0).unwrap();
        assert!(rep.signed[5].abs() < 1e-3, "null player got {}", rep.signed[5]);
        assert_eq!(rep.absolute[5], rep.signed[5].abs());
    }

    /// Additive games have order-independent marginals, so even the
    /// sampled estimator is exact for a linear scorer.
    #[test]
    fn shapley_linear_model_is_exact() {
        let weights = [1.5, -2.0, 0.25, 0.0, 3.0];
        let scorer = FnScorer(move |m: &Tensor<f64>| {
            let means = channel_means(m);
            Ok(weights.iter().zip(&means).map(|(w, v)| w * v).sum())
        });
        let instance = random_map(&[5, 2, 4], 7);
        let baseline = Tensor::zeros(&[5, 2, 4]);
        let rep = channel_shapley(&scorer, &instance, &baseline, 5 * 40, 1).unwrap();
        let means = channel_means(&instance);
        for j in 0..5 {
            let expect = weights[j] * means[j];
            assert!(
                (rep.signed[j] - expect).abs() < 1e-12,
                "channel {j}: {} vs {expect}",
                rep.signed[j]
            );
            assert!((rep.absolute[j] - expect.abs()).abs() < 1e-12);
        }
    }

    fn nonlinear_toy() -> FnScorer<impl Fn(&Tensor<f64>) -> Result<f64>> {
        FnScorer(|m: &Tensor<f64>| {
            let v = channel_means(m);
            Ok((v[0] + 2.0 * v[1]).tanh() + v[2] * v[3] + 0.5 * v[0] * v[2])
        })
    }

    #[test]
    fn shapley_efficiency_under_exact_enumeration() {
        let scorer = nonlinear_toy();
        let instance = random_map(&[4, 2, 3], 11);
        let baseline = random_map(&[4, 2, 3], 12);
        let signed = shapley_exact(&scorer, &instance, &baseline).unwrap();
        let f_i = scorer.score_maps(&[&instance]).unwrap()[0];
        let f_b = scorer.score_maps(&[&baseline]).unwrap()[0];
        let total: f64 = signed.iter().sum();
        assert!(
            (total - (f_i - f_b)).abs() < 1e-6,
            "sum {total} vs gap {}",
            f_i - f_b
        );
    }

    /// The sampled estimator telescopes per permutation, so efficiency
    /// holds exactly there too.
    #[test]
    fn shapley_sampled_efficiency_and_exact_agreement() {
        let scorer = nonlinear_toy();
        let instance = random_map(&[4, 2, 3], 13);
        let baseline = Tensor::zeros(&[4, 2, 3]);
        let exact = shapley_exact(&scorer, &instance, &baseline).unwrap();
        let rep = channel_shapley(&scorer, &instance, &baseline, 4 * 2000, 5).unwrap();
        assert_eq!(rep.n_permutations, 2000);
        let f_i = scorer.score_maps(&[&instance]).unwrap()[0];
        let f_b = scorer.score_maps(&[&baseline]).unwrap()[0];
        let total: f64 = rep.signed.iter().sum();
        assert!((total - (f_i - f_b)).abs() < 1e-9);
        for j in 0..4 {
            assert!(
                (rep.signed[j] - exact[j]).abs() <= 0.05,
                "channel {j}: sampled {} vs exact {}",
                rep.signed[j],
                exact[j]
            );
        }
    }

    #[test]
    fn shapley_symmetric_channels_match() {
        // Channels 0 and 1 enter the scorer symmetrically and carry
        // identical data, so their attributions must agree.
        let scorer = FnScorer(|m: &Tensor<f64>| {
            let v = channel_means(m);
            Ok((v[0] + v[1] + v[2]).tanh() + v[0] * v[1] * v[3])
        });
        let mut instance = random_map(&[4, 2, 3], 21);
        let stride = 6;
        let ch0: Vec<f64> = instance.data()[0..stride].to_vec();
        instance.data_mut()[stride..2 * stride].copy_from_slice(&ch0);
        let baseline = Tensor::zeros(&[4, 2, 3]);
        let rep = channel_shapley(&scorer, &instance, &baseline, 4 * 1000, 2).unwrap();
        assert!(
            (rep.signed[0] - rep.signed[1]).abs() <= 0.02,
            "{} vs {}",
            rep.signed[0],
            rep.signed[1]
        );
    }

    #[test]
    fn shapley_input_validation() {
        let scorer = FnScorer(|_: &Tensor<f64>| Ok(0.0));
        let a = Tensor::<f64>::zeros(&[4, 2]);
        let b = Tensor::<f64>::zeros(&[5, 2]);
        assert!(channel_shapley(&scorer, &a, &b, 100, 0).is_err());
        assert!(channel_shapley(&scorer, &a, &a, 3, 0).is_err());
        let nan = FnScorer(|_: &Tensor<f64>| Ok(f64::NAN));
        assert!(channel_shapley(&nan, &a, &a, 100, 0).is_err());
        let wide = Tensor::<f64>::zeros(&[17, 2]);
        assert!(shapley_exact(&scorer, &wide, &wide).is_err());
    }

    #[test]
    fn smoothing_identity_cases() {
        let raw = [0.1, 0.9, 0.4, 0.6];
        let t = smooth_and_threshold(&raw, 1, 0.5).unwrap();
        assert_eq!(t.smoothed, raw.to_vec());
        assert_eq!(t.decisions, vec![0, 1, 0, 1]);

        let flat = [0.3; 10];
        let t = smooth_and_threshold(&flat, 5, 0.5).unwrap();
        for s in &t.smoothed {
            assert!((s - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn smoothing_step_is_monotone() {
        let mut raw = vec![0.0; 15];
        raw.extend(vec![1.0; 15]);
        let t = smooth_and_threshold(&raw, 21, 0.5).unwrap();
        assert_eq!(t.smoothed.len(), raw.len());
        for w in t.smoothed.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "not monotone: {w:?}");
        }
        for (d, s) in t.decisions.iter().zip(&t.smoothed) {
            assert_eq!(*d == 1, *s >= 0.5);
        }
    }

    #[test]
    fn smoothing_rejects_bad_windows() {
        let raw = [0.5; 4];
        assert!(smooth_and_threshold(&raw, 4, 0.5).is_err());
        assert!(smooth_and_threshold(&raw, 0, 0.5).is_err());
        assert!(smooth_and_threshold(&raw, 11, 0.5).is_err());
        assert!(smooth_and_threshold(&raw, 9, 0.5).is_ok());
        assert!(smooth_and_threshold(&[], 1, 0.5).is_err());
    }

    #[test]
    fn kl_hand_value() {
        let kl = kl_divergence(&[0.5, 0.5], &[0.25, 0.75]);
        let expect = 0.5 * 2.0f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((kl - expect).abs() < 1e-12);
        assert!((kl - 0.1438).abs() < 5e-5);
        assert_eq!(kl_divergence(&[0.25, 0.75], &[0.25, 0.75]), 0.0);
    }

    #[test]
    fn kl_map_identical_maps_are_zero() {
        let m = random_map(&[3, 4, 5], 31);
        let maps = vec![m.clone(), m.clone(), m];
        let kl = kl_map(&maps, 32).unwrap();
        assert_eq!(kl.values.len(), 3);
        for row in &kl.values {
            assert_eq!(row.len(), 2);
            for &v in row {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn kl_map_nonnegative_and_constant_channel_zero() {
        let mut maps = Vec::new();
        for seed in 0..5 {
            let mut m = random_map(&[4, 3, 7], 40 + seed);
            // Channel 2 is the same constant in every map.
            for v in &mut m.data_mut()[2 * 21..3 * 21] {
                *v = 1.25;
            }
            maps.push(m);
        }
        let kl = kl_map(&maps, 16).unwrap();
        for (ch, row) in kl.values.iter().enumerate() {
            for &v in row {
                assert!(v >= 0.0);
                if ch == 2 {
                    assert_eq!(v, 0.0);
                }
            }
        }
    }

    #[test]
    fn kl_map_localizes_a_spread_change() {
        // Channel 1's spread doubles in variance from index s on.
        let s = 6usize;
        let n = 10usize;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut maps = Vec::new();
        for t in 0..n {
            let width = if t >= s { std::f64::consts::SQRT_2 } else { 1.0 };
            let mut m = random_map(&[3, 13, 201], 100 + t as u64);
            for v in &mut m.data_mut()[13 * 201..2 * 13 * 201] {
                *v = rng.gen_range(-width..width);
            }
            maps.push(m);
        }
        let kl = kl_map(&maps, 32).unwrap();
        let row = &kl.values[1];
        let argmax = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!(
            argmax == s - 1 || argmax == s,
            "change at {s}, argmax at {argmax}: {row:?}"
        );
    }

    #[test]
    fn kl_map_input_validation() {
        let m = random_map(&[2, 3, 3], 1);
        assert!(kl_map(&[m.clone()], 32).is_err());
        let other = random_map(&[2, 3, 4], 2);
        assert!(kl_map(&[m.clone(), other], 32).is_err());
        assert!(kl_map(&[m.clone(), m], 0).is_err());
    }
}
