//! Training loops, metrics, cross-validation, the pre-ictal duration
//! sweep, and leave-one-patient-out transfer with fine-tuning.

use crate::dataset::{
    build_balanced_dataset, make_folds, mine_pairs_subset, split_lopo, Dataset, LabelPolicy,
    PairStream,
};
use crate::error::{Error, Result};
use crate::ingest::EegRecording;
use crate::mfcc::{mfcc_map, MfccConfig};
use crate::models::{model1_loss, model2_loss, Model1, Model2, N_PATIENTS};
use crate::nn::{bce_logit_grad, cce_logit_grad};
use crate::nn::adam::{AdamConfig, AdamState};
use crate::nn::graph::Mode;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

const EVAL_BATCH: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Model1,
    Model2,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
    pub lambda: f64,
    pub gamma: f64,
    pub margin: f64,
    /// Overrides the size-mapped fine-tuning batch when set.
    pub fine_tune_batch: Option<usize>,
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch: 600,
            lr: 0.001,
            seed: 0,
            lambda: crate::models::DEFAULT_LAMBDA,
            gamma: crate::models::DEFAULT_GAMMA,
            margin: crate::models::DEFAULT_MARGIN,
            fine_tune_batch: None,
            threshold: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if self.batch < 1 {
            return Err(Error::config("batch must be at least 1"));
        }
        Ok(())
    }
}

/// Feature maps plus targets, aligned by index with the dataset the
/// set was built from.
pub struct FeatureSet<T> {
    /// Each map is [23, 13, 201].
    pub maps: Vec<Tensor<T>>,
    /// Seizure targets, 0 or 1.
    pub labels: Vec<T>,
    pub subjects: Vec<u32>,
}

impl<T: Scalar> FeatureSet<T> {
    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn labels_u8(&self, indices: &[usize]) -> Vec<u8> {
        indices
            .iter()
            .map(|&i| if self.labels[i] > T::from_f64_lossy(0.5) { 1 } else { 0 })
            .collect()
    }
}

pub fn featurize<T: Scalar>(dataset: &Dataset<T>, cfg: &MfccConfig) -> Result<FeatureSet<T>> {
    let mut maps = Vec::with_capacity(dataset.len());
    let mut labels = Vec::with_capacity(dataset.len());
    let mut subjects = Vec::with_capacity(dataset.len());
    for w in &dataset.windows {
        if !(1..=N_PATIENTS as u32).contains(&w.subject_id) {
            return Err(Error::dataset(format!(
                "subject id {} outside 1..={N_PATIENTS}",
                w.subject_id
            )));
        }
        maps.push(mfcc_map(&w.samples, cfg, w.fs)?.values);
        labels.push(T::from_f64_lossy(w.label.as_u8() as f64));
        subjects.push(w.subject_id);
    }
    Ok(FeatureSet {
        maps,
        labels,
        subjects,
    })
}

fn stack_batch<T: Scalar>(set: &FeatureSet<T>, indices: &[usize]) -> Result<Tensor<T>> {
    let refs: Vec<&Tensor<T>> = indices.iter().map(|&i| &set.maps[i]).collect();
    Tensor::stack(&refs)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub steps: usize,
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
    pub total_steps: u64,
}

/// Train the multitask CNN on the given window indices: seeded
/// shuffling each epoch, Adam steps, max-norm projection after every
/// step.
pub fn train_model1<T: Scalar>(
    model: &mut Model1<T>,
    set: &FeatureSet<T>,
    indices: &[usize],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if indices.is_empty() {
        return Err(Error::dataset("no training windows"));
    }
    let adam_cfg = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let mut state = AdamState::new(&model.graph.params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let lambda = T::from_f64_lossy(cfg.lambda);
    let mut order = indices.to_vec();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut steps = 0usize;
        for chunk in order.chunks(cfg.batch) {
            let x = stack_batch(set, chunk)?;
            let y_seizure: Vec<T> = chunk.iter().map(|&i| set.labels[i]).collect();
            let y_patient: Vec<usize> = chunk.iter().map(|&i| set.subjects[i] as usize - 1).collect();
            let fwd = model.graph.forward(&[&x], Mode::Train, Some(&mut rng))?;
            let (loss, _, _) = model1_loss(
                fwd.value(model.p_seizure),
                fwd.value(model.q_patient),
                &y_seizure,
                &y_patient,
                lambda,
            )?;
            let lf = loss.to_f64_lossy();
            if !lf.is_finite() {
                return Err(Error::numeric(format!(
                    "non-finite loss at epoch {epoch}, step {}",
                    state.step + 1
                )));
            }
            // Backward is seeded at the logits with the fused loss
            // gradients; chaining through the activations instead
            // stalls for good once a head saturates.
            let mut gs = bce_logit_grad(fwd.value(model.p_seizure), &y_seizure)?;
            gs.scale(lambda);
            let mut gc = cce_logit_grad(fwd.value(model.q_patient), &y_patient)?;
            gc.scale(T::one() - lambda);
            let grads = model
                .graph
                .backward(&fwd, &[(model.logit_seizure, gs), (model.logit_patient, gc)])?;
            state
                .apply(&mut model.graph.params, &grads, &adam_cfg)
                .map_err(|e| Error::numeric(format!("epoch {epoch}, step {}: {e}", state.step + 1)))?;
            model.apply_maxnorm();
            loss_sum += lf;
            steps += 1;
        }
        history.push(EpochRecord {
            epoch,
            mean_loss: loss_sum / steps as f64,
            steps,
        });
    }
    Ok(TrainReport {
        history,
        total_steps: state.step,
    })
}

/// Train the Siamese model on a mined pair stream.
pub fn train_model2<T: Scalar>(
    model: &mut Model2<T>,
    set: &FeatureSet<T>,
    pairs: &PairStream,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if pairs.pairs.is_empty() {
        return Err(Error::dataset("no training pairs"));
    }
    let adam_cfg = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let mut state = AdamState::new(&model.graph.params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let gamma = T::from_f64_lossy(cfg.gamma);
    let margin = T::from_f64_lossy(cfg.margin);
    let mut order = pairs.pairs.clone();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut steps = 0usize;
        for chunk in order.chunks(cfg.batch) {
            let prim: Vec<usize> = chunk.iter().map(|p| p.primary).collect();
            let sec: Vec<usize> = chunk.iter().map(|p| p.secondary).collect();
            let xa = stack_batch(set, &prim)?;
            let xb = stack_batch(set, &sec)?;
            let same: Vec<T> = chunk
                .iter()
                .map(|p| T::from_f64_lossy(p.same_patient as u8 as f64))
                .collect();
            let y: Vec<T> = prim.iter().map(|&i| set.labels[i]).collect();
            let fwd = model.graph.forward(&[&xa, &xb], Mode::Train, Some(&mut rng))?;
            let (loss, gd, _) = model2_loss(
                fwd.value(model.distance),
                &same,
                fwd.value(model.p_seizure),
                &y,
                gamma,
                margin,
            )?;
            let lf = loss.to_f64_lossy();
            if !lf.is_finite() {
                return Err(Error::numeric(format!(
                    "non-finite loss at epoch {epoch}, step {}",
                    state.step + 1
                )));
            }
            // Fused seed at the logit, as in the Model I loop.
            let mut gp = bce_logit_grad(fwd.value(model.p_seizure), &y)?;
            gp.scale(T::one() - gamma);
            let grads = model
                .graph
                .backward(&fwd, &[(model.distance, gd), (model.logit_seizure, gp)])?;
            state
                .apply(&mut model.graph.params, &grads, &adam_cfg)
                .map_err(|e| Error::numeric(format!("epoch {epoch}, step {}: {e}", state.step + 1)))?;
            loss_sum += lf;
            steps += 1;
        }
        history.push(EpochRecord {
            epoch,
            mean_loss: loss_sum / steps as f64,
            steps,
        });
    }
    Ok(TrainReport {
        history,
        total_steps: state.step,
    })
}

// -- metrics ----------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fneg: usize,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub roc_auc: Option<f64>,
}

impl Metrics {
    /// Threshold scores (predict 1 when score >= threshold) and fill
    /// the confusion counts; AUC is absent when only one class occurs.
    pub fn from_scores(scores: &[f64], labels: &[u8], threshold: f64) -> Result<Metrics> {
        if scores.len() != labels.len() {
            return Err(Error::shape(format!(
                "{} scores vs {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if scores.is_empty() {
            return Err(Error::dataset("no scores to evaluate"));
        }
        let (mut tp, mut fp, mut tn, mut fneg) = (0usize, 0usize, 0usize, 0usize);
        for (&s, &y) in scores.iter().zip(labels) {
            let pred = s >= threshold;
            match (pred, y) {
                (true, 1) => tp += 1,
                (true, _) => fp += 1,
                (false, 1) => fneg += 1,
                (false, _) => tn += 1,
            }
        }
        let n = scores.len() as f64;
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                f64::NAN
            } else {
                num as f64 / den as f64
            }
        };
        Ok(Metrics {
            tp,
            fp,
            tn,
            fneg,
            accuracy: (tp + tn) as f64 / n,
            sensitivity: ratio(tp, tp + fneg),
            specificity: ratio(tn, tn + fp),
            roc_auc: roc_auc(scores, labels).ok(),
        })
    }
}

/// Mann-Whitney ROC-AUC: the fraction of (positive, negative) pairs
/// ranked correctly, ties worth one half. Computed through average
/// ranks, which is the same statistic without the quadratic loop.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::numeric("non-finite score"));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::numeric("roc-auc needs both classes"));
    }
    let n = scores.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // 1-based average rank of the tie group [i, j].
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            if labels[k] == 1 {
                rank_sum_pos += avg;
            }
        }
        i = j + 1;
    }
    let (np, nn) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn))
}

/// Anything that can turn feature-map batches into seizure scores.
pub trait WindowScorer<T: Scalar> {
    fn score_batch(&self, x: &Tensor<T>) -> Result<Vec<f64>>;
}

impl<T: Scalar> WindowScorer<T> for Model1<T> {
    fn score_batch(&self, x: &Tensor<T>) -> Result<Vec<f64>> {
        let fwd = self.graph.forward(&[x], Mode::Eval, None)?;
        Ok(fwd
            .value(self.p_seizure)
            .data()
            .iter()
            .map(|v| v.to_f64_lossy())
            .collect())
    }
}

impl<T: Scalar> WindowScorer<T> for Model2<T> {
    /// Scores one window through the classification branch alone; the
    /// sibling branch is never evaluated.
    fn score_batch(&self, x: &Tensor<T>) -> Result<Vec<f64>> {
        let needed = self.graph.ancestors(self.p_seizure);
        let empty = Tensor::zeros(&[0]);
        let fwd = self
            .graph
            .forward_where(&[x, &empty], &needed, Mode::Eval, None)?;
        Ok(fwd
            .value(self.p_seizure)
            .data()
            .iter()
            .map(|v| v.to_f64_lossy())
            .collect())
    }
}

pub fn score_indices<T: Scalar, M: WindowScorer<T>>(
    model: &M,
    set: &FeatureSet<T>,
    indices: &[usize],
) -> Result<Vec<f64>> {
    let mut scores = Vec::with_capacity(indices.len());
    for chunk in indices.chunks(EVAL_BATCH) {
        let x = stack_batch(set, chunk)?;
        scores.extend(model.score_batch(&x)?);
    }
    Ok(scores)
}

pub fn evaluate<T: Scalar, M: WindowScorer<T>>(
    model: &M,
    set: &FeatureSet<T>,
    indices: &[usize],
    threshold: f64,
) -> Result<Metrics> {
    let scores = score_indices(model, set, indices)?;
    Metrics::from_scores(&scores, &set.labels_u8(indices), threshold)
}

fn tensor_rows<T: Scalar>(vals: &Tensor<T>) -> Vec<Vec<f64>> {
    let b = vals.shape()[0];
    let k = vals.len() / b;
    (0..b)
        .map(|i| {
            vals.data()[i * k..(i + 1) * k]
                .iter()
                .map(|v| v.to_f64_lossy())
                .collect()
        })
        .collect()
}

/// Embedding vectors (the linear layer ahead of the heads) for the
/// given windows, one row per index.
pub fn embeddings1<T: Scalar>(
    model: &Model1<T>,
    set: &FeatureSet<T>,
    indices: &[usize],
) -> Result<Vec<Vec<f64>>> {
    let needed = model.graph.ancestors(model.embedding);
    let mut rows = Vec::with_capacity(indices.len());
    for chunk in indices.chunks(EVAL_BATCH) {
        let x = stack_batch(set, chunk)?;
        let fwd = model
            .graph
            .forward_where(&[&x], &needed, Mode::Eval, None)?;
        rows.extend(tensor_rows(fwd.value(model.embedding)));
    }
    Ok(rows)
}

/// Siamese embeddings computed through one branch.
pub fn embeddings2<T: Scalar>(
    model: &Model2<T>,
    set: &FeatureSet<T>,
    indices: &[usize],
) -> Result<Vec<Vec<f64>>> {
    let needed = model.graph.ancestors(model.embed_a);
    let empty = Tensor::zeros(&[0]);
    let mut rows = Vec::with_capacity(indices.len());
    for chunk in indices.chunks(EVAL_BATCH) {
        let x = stack_batch(set, chunk)?;
        let fwd = model
            .graph
            .forward_where(&[&x, &empty], &needed, Mode::Eval, None)?;
        rows.extend(tensor_rows(fwd.value(model.embed_a)));
    }
    Ok(rows)
}

// -- cross-validation -------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct CrossValReport {
    pub folds: Vec<Metrics>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_sensitivity: f64,
    pub std_sensitivity: f64,
    pub mean_specificity: f64,
    pub std_specificity: f64,
    pub mean_auc: f64,
    pub std_auc: f64,
}

/// Unweighted mean and sample standard deviation; non-finite entries
/// (degenerate folds) are skipped.
fn mean_std(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let vals: Vec<f64> = xs.filter(|v| v.is_finite()).collect();
    if vals.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    if vals.len() < 2 {
        return (mean, 0.0);
    }
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
    (mean, var.sqrt())
}

fn summarize(folds: Vec<Metrics>) -> CrossValReport {
    let (mean_accuracy, std_accuracy) = mean_std(folds.iter().map(|m| m.accuracy));
    let (mean_sensitivity, std_sensitivity) = mean_std(folds.iter().map(|m| m.sensitivity));
    let (mean_specificity, std_specificity) = mean_std(folds.iter().map(|m| m.specificity));
    let (mean_auc, std_auc) = mean_std(folds.iter().filter_map(|m| m.roc_auc));
    CrossValReport {
        folds,
        mean_accuracy,
        std_accuracy,
        mean_sensitivity,
        std_sensitivity,
        mean_specificity,
        std_specificity,
        mean_auc,
        std_auc,
    }
}

fn fold_seed(base: u64, fold: usize) -> u64 {
    base.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(fold as u64 + 1))
}

/// K-fold cross-validation: a fresh model per fold trained on the
/// other folds, evaluated on the held-out one.
pub fn cross_validate<T: Scalar>(
    dataset: &Dataset<T>,
    mfcc: &MfccConfig,
    cfg: &TrainConfig,
    kind: ModelKind,
    k: usize,
) -> Result<CrossValReport> {
    let set = featurize(dataset, mfcc)?;
    let plan = make_folds(dataset, k, cfg.seed)?;
    let mut folds = Vec::with_capacity(k);
    for fold in 0..k {
        let train_idx = plan.train_indices(fold);
        let val_idx = plan.fold_indices(fold);
        let train_set: HashSet<usize> = train_idx.iter().copied().collect();
        if val_idx.iter().any(|i| train_set.contains(i)) {
            return Err(Error::dataset(format!(
                "fold {fold} overlaps its own training split"
            )));
        }
        let seed = fold_seed(cfg.seed, fold);
        let mut fold_cfg = *cfg;
        fold_cfg.seed = seed;
        let metrics = match kind {
            ModelKind::Model1 => {
                let mut model: Model1<T> = Model1::build(seed)?;
                train_model1(&mut model, &set, &train_idx, &fold_cfg)?;
                evaluate(&model, &set, &val_idx, cfg.threshold)?
            }
            ModelKind::Model2 => {
                let pairs = mine_pairs_subset(dataset, &train_idx, seed)?;
                let mut model: Model2<T> = Model2::build(seed)?;
                train_model2(&mut model, &set, &pairs, &fold_cfg)?;
                evaluate(&model, &set, &val_idx, cfg.threshold)?
            }
        };
        log::info!(
            "fold {fold}: accuracy {:.4}, auc {:?}",
            metrics.accuracy,
            metrics.roc_auc
        );
        folds.push(metrics);
    }
    Ok(summarize(folds))
}

// -- pre-ictal duration sweep ------------------------------------------

/// Default (minutes, pre-ictal overlap seconds) grid.
pub const DEFAULT_SWEEP: [(f64, f64); 3] = [(15.0, 3.5), (30.0, 2.5), (60.0, 2.0)];

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub minutes: f64,
    pub overlap: f64,
    pub windows: usize,
    pub report: CrossValReport,
}

/// Rebuild the dataset for each pre-ictal duration (horizon = minutes,
/// with the matching window overlap) and cross-validate the Siamese
/// model on it.
pub fn duration_sweep<T: Scalar>(
    recordings: &[EegRecording<T>],
    base: &LabelPolicy,
    entries: &[(f64, f64)],
    mfcc: &MfccConfig,
    cfg: &TrainConfig,
    k: usize,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(entries.len());
    for &(minutes, overlap) in entries {
        if minutes > 60.0 {
            return Err(Error::config(format!(
                "pre-ictal duration {minutes} min exceeds the 60 min ceiling"
            )));
        }
        let policy = LabelPolicy {
            preictal_horizon: minutes * 60.0,
            preictal_overlap: overlap,
            ..*base
        };
        policy.validate()?;
        let ds = build_balanced_dataset(recordings, &policy, cfg.seed)?;
        let report = cross_validate(&ds, mfcc, cfg, ModelKind::Model2, k)?;
        rows.push(SweepRow {
            minutes,
            overlap,
            windows: ds.len(),
            report,
        });
    }
    Ok(rows)
}

// -- transfer learning --------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct TransferOutcome {
    pub subject: u32,
    pub n_requested: Option<usize>,
    pub n_used: usize,
    pub batch_used: usize,
    /// Pretrained (leave-one-patient-out) metrics on the validation
    /// subset, before any fine-tuning.
    pub baseline: Metrics,
    pub tuned: Metrics,
}

/// Fine-tune a pretrained model on `n` windows of the held-out
/// subject (None = all available) and score it on a fixed seeded
/// validation fifth of the subject's windows.
pub fn fine_tune<T: Scalar>(
    pretrained: &Model1<T>,
    subject_set: &FeatureSet<T>,
    subject: u32,
    n: Option<usize>,
    cfg: &TrainConfig,
) -> Result<TransferOutcome> {
    let len = subject_set.len();
    if len < 2 {
        return Err(Error::dataset(format!(
            "subject {subject} has {len} windows; need at least 2 for a validation split"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut rng);
    let n_val = (len / 5).max(1);
    let (val_idx, pool) = order.split_at(n_val);
    let avail = pool.len();
    let n_used = match n {
        Some(x) if x > avail => {
            log::warn!(
                "subject {subject}: {x} fine-tuning windows requested, only {avail} available; using all"
            );
            avail
        }
        Some(x) => x.max(1),
        None => avail,
    };
    let train_idx = &pool[..n_used];
    debug_assert!(train_idx.iter().all(|i| !val_idx.contains(i)));
    let batch_used = cfg
        .fine_tune_batch
        .unwrap_or_else(|| (n_used / 10).clamp(1, 400));

    let baseline = evaluate(pretrained, subject_set, val_idx, cfg.threshold)?;

    let mut model = pretrained.clone();
    let mut ft_cfg = *cfg;
    ft_cfg.batch = batch_used;
    // The patient head has nothing to learn from a single subject;
    // fine-tuning drives the binary head alone.
    ft_cfg.lambda = 1.0;
    train_model1(&mut model, subject_set, train_idx, &ft_cfg)?;
    let tuned = evaluate(&model, subject_set, val_idx, cfg.threshold)?;

    Ok(TransferOutcome {
        subject,
        n_requested: n,
        n_used,
        batch_used,
        baseline,
        tuned,
    })
}

/// Leave one subject out, pretrain on the rest, then fine-tune on
/// growing sample counts of the held-out subject.
pub fn transfer_curve<T: Scalar>(
    dataset: &Dataset<T>,
    subject: u32,
    ns: &[Option<usize>],
    mfcc: &MfccConfig,
    cfg: &TrainConfig,
) -> Result<Vec<TransferOutcome>> {
    let (train_ds, held_ds) = split_lopo(dataset, subject)?;
    let train_set = featurize(&train_ds, mfcc)?;
    let held_set = featurize(&held_ds, mfcc)?;
    let mut model: Model1<T> = Model1::build(cfg.seed)?;
    let all: Vec<usize> = (0..train_set.len()).collect();
    train_model1(&mut model, &train_set, &all, cfg)?;
    ns.iter()
        .map(|&n| fine_tune(&model, &held_set, subject, n, cfg))
        .collect()
}
