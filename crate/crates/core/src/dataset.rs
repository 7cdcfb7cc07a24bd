//! Windowing and labeling of recordings, class balancing, fold plans,
//! leave-one-patient-out splits, and Siamese pair mining.

use crate::container;
use crate::error::{Error, Result};
use crate::ingest::EegRecording;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::Write;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Interictal = 0,
    Preictal = 1,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::Interictal => 0,
            Label::Preictal => 1,
        }
    }

    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Label::Interictal),
            1 => Ok(Label::Preictal),
            other => Err(Error::dataset(format!("unknown label code {other}"))),
        }
    }
}

/// Window labeling rules, all in seconds.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelPolicy {
    /// A window is pre-ictal when it ends at or before an onset and
    /// starts no earlier than this long before it.
    pub preictal_horizon: f64,
    /// A window is interictal only when it keeps more than this
    /// distance from every onset and offset.
    pub interictal_exclusion: f64,
    pub window_len: f64,
    pub preictal_overlap: f64,
    pub interictal_overlap: f64,
}

impl Default for LabelPolicy {
    fn default() -> Self {
        LabelPolicy {
            preictal_horizon: 3600.0,
            interictal_exclusion: 14400.0,
            window_len: 10.0,
            preictal_overlap: 2.0,
            interictal_overlap: 0.0,
        }
    }
}

impl LabelPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_len > 0.0) {
            return Err(Error::config("window_len must be positive"));
        }
        for (name, ov) in [
            ("preictal_overlap", self.preictal_overlap),
            ("interictal_overlap", self.interictal_overlap),
        ] {
            if !(0.0..self.window_len).contains(&ov) {
                return Err(Error::config(format!(
                    "{name} {ov} outside [0, window_len)"
                )));
            }
        }
        if self.preictal_horizon > self.interictal_exclusion {
            return Err(Error::config(format!(
                "preictal horizon {} exceeds interictal exclusion {}",
                self.preictal_horizon, self.interictal_exclusion
            )));
        }
        Ok(())
    }

    /// Samples per window; errors unless fs * window_len is integral.
    pub fn window_samples(&self, fs: f64) -> Result<usize> {
        let exact = fs * self.window_len;
        if (exact - exact.round()).abs() > 1e-9 || exact.round() < 1.0 {
            return Err(Error::dataset(format!(
                "window of {} s at {} Hz is not a whole sample count",
                self.window_len, fs
            )));
        }
        Ok(exact.round() as usize)
    }

    fn stride_samples(&self, fs: f64, overlap: f64) -> Result<usize> {
        let st = ((self.window_len - overlap) * fs).round() as i64;
        if st < 1 {
            return Err(Error::dataset(format!(
                "window stride under one sample (overlap {overlap} s at {fs} Hz)"
            )));
        }
        Ok(st as usize)
    }
}

/// One labeled 10-second excerpt.
#[derive(Clone, Debug)]
pub struct LabeledWindow<T> {
    pub subject_id: u32,
    pub label: Label,
    pub file: String,
    /// Offset of the window start inside its file, seconds.
    pub start_offset: f64,
    pub start_sample: usize,
    pub fs: f64,
    /// Shape [23, fs * window_len].
    pub samples: Tensor<T>,
}

/// Decide the class of a window starting at `t`, given seizure
/// (onset, offset) intervals in the same time base. `None` means the
/// window belongs to neither class and is dropped: it overlaps a
/// seizure, or falls in the gap between the pre-ictal horizon and the
/// interictal exclusion.
pub fn classify_window(t: f64, events: &[(f64, f64)], policy: &LabelPolicy) -> Option<Label> {
    let end = t + policy.window_len;
    for &(onset, offset) in events {
        if t < offset && end > onset {
            return None;
        }
    }
    for &(onset, _) in events {
        if onset - policy.preictal_horizon <= t && end <= onset {
            return Some(Label::Preictal);
        }
    }
    let clear = events.iter().all(|&(onset, offset)| {
        [onset, offset]
            .iter()
            .all(|&p| t - p > policy.interictal_exclusion || p - end > policy.interictal_exclusion)
    });
    if clear {
        Some(Label::Interictal)
    } else {
        None
    }
}

/// Window one recording against an explicit event list. Events are in
/// seconds relative to this recording's start and may lie outside it
/// (seizures chained in from the subject's other files).
pub fn label_windows_with_events<T: Scalar>(
    recording: &EegRecording<T>,
    events: &[(f64, f64)],
    policy: &LabelPolicy,
) -> Result<Vec<LabeledWindow<T>>> {
    policy.validate()?;
    let fs = recording.fs;
    let n = policy.window_samples(fs)?;
    let total = recording.channels.shape()[1];
    let mut out = Vec::new();
    for (want, overlap) in [
        (Label::Preictal, policy.preictal_overlap),
        (Label::Interictal, policy.interictal_overlap),
    ] {
        let stride = policy.stride_samples(fs, overlap)?;
        let mut start = 0usize;
        while start + n <= total {
            let t = start as f64 / fs;
            if classify_window(t, events, policy) == Some(want) {
                let mut data = Vec::with_capacity(23 * n);
                for ch in 0..23 {
                    let row = ch * total + start;
                    data.extend_from_slice(&recording.channels.data()[row..row + n]);
                }
                out.push(LabeledWindow {
                    subject_id: recording.subject_id,
                    label: want,
                    file: recording.file_name().to_string(),
                    start_offset: t,
                    start_sample: start,
                    fs,
                    samples: Tensor::from_vec(&[23, n], data)?,
                });
            }
            start += stride;
        }
    }
    Ok(out)
}

/// Window one recording against its own annotations only.
pub fn label_windows<T: Scalar>(
    recording: &EegRecording<T>,
    policy: &LabelPolicy,
) -> Result<Vec<LabeledWindow<T>>> {
    label_windows_with_events(recording, &recording.annotations.seizure_intervals, policy)
}

/// Every seizure of the subject, expressed in seconds relative to
/// `target`'s start via the recording timestamps.
pub fn chained_events<T>(recordings: &[EegRecording<T>], target: usize) -> Vec<(f64, f64)> {
    let base = &recordings[target];
    let mut events = Vec::new();
    for r in recordings {
        if r.subject_id != base.subject_id {
            continue;
        }
        let shift = (r.start_datetime - base.start_datetime).num_seconds() as f64;
        for &(s, e) in &r.annotations.seizure_intervals {
            events.push((s + shift, e + shift));
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    events
}

#[derive(Clone, Debug)]
pub struct Dataset<T> {
    pub windows: Vec<LabeledWindow<T>>,
    /// Indexed by `Label as usize`: [interictal, preictal].
    pub class_counts: [usize; 2],
    pub subject_counts: BTreeMap<u32, usize>,
}

impl<T: Scalar> Dataset<T> {
    pub fn from_windows(windows: Vec<LabeledWindow<T>>) -> Self {
        let mut class_counts = [0usize; 2];
        let mut subject_counts = BTreeMap::new();
        for w in &windows {
            class_counts[w.label.as_u8() as usize] += 1;
            *subject_counts.entry(w.subject_id).or_insert(0) += 1;
        }
        Dataset {
            windows,
            class_counts,
            subject_counts,
        }
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn is_balanced(&self) -> bool {
        self.class_counts[0].abs_diff(self.class_counts[1]) <= 1
    }

    pub fn subjects(&self) -> Vec<u32> {
        self.subject_counts.keys().copied().collect()
    }
}

/// Label every recording (with cross-file seizure chaining), keep all
/// pre-ictal windows, and subsample interictal windows to match. When
/// interictal windows are the minority everything is kept and a
/// warning logged.
pub fn build_balanced_dataset<T: Scalar>(
    recordings: &[EegRecording<T>],
    policy: &LabelPolicy,
    seed: u64,
) -> Result<Dataset<T>> {
    let mut windows = Vec::new();
    for i in 0..recordings.len() {
        let events = chained_events(recordings, i);
        windows.extend(label_windows_with_events(&recordings[i], &events, policy)?);
    }
    let n_pre = windows.iter().filter(|w| w.label == Label::Preictal).count();
    let n_inter = windows.len() - n_pre;
    if n_pre == 0 || n_inter == 0 {
        return Err(Error::dataset(format!(
            "cannot balance: {n_pre} pre-ictal and {n_inter} interictal windows"
        )));
    }

    let windows = if n_inter > n_pre {
        let inter_positions: Vec<usize> = windows
            .iter()
            .enumerate()
            .filter(|(_, w)| w.label == Label::Interictal)
            .map(|(i, _)| i)
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keep: HashSet<usize> = rand::seq::index::sample(&mut rng, inter_positions.len(), n_pre)
            .into_iter()
            .map(|r| inter_positions[r])
            .collect();
        windows
            .into_iter()
            .enumerate()
            .filter(|(i, w)| w.label == Label::Preictal || keep.contains(i))
            .map(|(_, w)| w)
            .collect()
    } else {
        if n_inter < n_pre {
            log::warn!(
                "interictal windows are the minority ({n_inter} vs {n_pre} pre-ictal); keeping all"
            );
        }
        windows
    };

    let dataset = Dataset::from_windows(windows);
    let present: BTreeSet<u32> = dataset.subject_counts.keys().copied().collect();
    for r in recordings {
        if !present.contains(&r.subject_id) {
            log::warn!(
                "subject {} contributes no windows after labeling and balancing",
                r.subject_id
            );
        }
    }
    Ok(dataset)
}

/// Window index -> fold id, produced by a seeded shuffle followed by
/// round-robin assignment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn fold_indices(&self, fold: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &f)| f == fold)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &f)| f != fold)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

pub fn make_folds<T: Scalar>(dataset: &Dataset<T>, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::dataset(format!("need at least 2 folds, got {k}")));
    }
    if k > dataset.len() {
        return Err(Error::dataset(format!(
            "{k} folds over {} windows",
            dataset.len()
        )));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut assignment = vec![0usize; dataset.len()];
    for (rank, &idx) in order.iter().enumerate() {
        assignment[idx] = rank % k;
    }
    Ok(FoldPlan { k, assignment, seed })
}

/// One mined pair: indices into the dataset plus the same-patient flag
/// driving the contrastive target. The classification target is the
/// primary window's label.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Pair {
    pub primary: usize,
    pub secondary: usize,
    pub same_patient: bool,
}

#[derive(Clone, Debug)]
pub struct PairStream {
    pub pairs: Vec<Pair>,
    pub seed: u64,
}

impl PairStream {
    pub fn same_fraction(&self) -> f64 {
        if self.pairs.is_empty() {
            return 0.0;
        }
        self.pairs.iter().filter(|p| p.same_patient).count() as f64 / self.pairs.len() as f64
    }
}

/// Offline pair mining: each window appears once as the primary, in
/// seeded-shuffled order; alternating slots are paired with a window
/// of the same subject or of a different one, keeping the stream
/// exactly half-and-half.
pub fn mine_pairs<T: Scalar>(dataset: &Dataset<T>, seed: u64) -> Result<PairStream> {
    let all: Vec<usize> = (0..dataset.len()).collect();
    mine_pairs_subset(dataset, &all, seed)
}

/// Pair mining restricted to a subset of window indices (a training
/// split); pairs still carry whole-dataset indices.
pub fn mine_pairs_subset<T: Scalar>(
    dataset: &Dataset<T>,
    indices: &[usize],
    seed: u64,
) -> Result<PairStream> {
    let mut by_subject: HashMap<u32, Vec<usize>> = HashMap::new();
    for &i in indices {
        by_subject
            .entry(dataset.windows[i].subject_id)
            .or_default()
            .push(i);
    }
    if by_subject.len() < 2 {
        return Err(Error::dataset("pair mining needs at least two subjects"));
    }
    let mut others: HashMap<u32, Vec<usize>> = HashMap::new();
    for &subject in by_subject.keys() {
        others.insert(
            subject,
            indices
                .iter()
                .copied()
                .filter(|&i| dataset.windows[i].subject_id != subject)
                .collect(),
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = indices.to_vec();
    order.shuffle(&mut rng);

    let mut pairs = Vec::with_capacity(order.len());
    for (slot, &primary) in order.iter().enumerate() {
        let subject = dataset.windows[primary].subject_id;
        let want_same = slot % 2 == 0;
        let secondary = if want_same {
            let pool = &by_subject[&subject];
            let mut found = None;
            for _ in 0..100 {
                let cand = pool[rng.gen_range(0..pool.len())];
                if cand != primary {
                    found = Some(cand);
                    break;
                }
            }
            found.ok_or_else(|| {
                Error::dataset(format!(
                    "no same-subject partner for a window of subject {subject} after 100 draws"
                ))
            })?
        } else {
            let pool = &others[&subject];
            pool[rng.gen_range(0..pool.len())]
        };
        pairs.push(Pair {
            primary,
            secondary,
            same_patient: dataset.windows[secondary].subject_id == subject,
        });
    }
    Ok(PairStream { pairs, seed })
}

/// Split one subject out for transfer evaluation.
pub fn split_lopo<T: Scalar>(
    dataset: &Dataset<T>,
    subject_id: u32,
) -> Result<(Dataset<T>, Dataset<T>)> {
    if dataset.subject_counts.get(&subject_id).copied().unwrap_or(0) == 0 {
        return Err(Error::dataset(format!(
            "subject {subject_id} has no windows in the dataset"
        )));
    }
    let mut train = Vec::new();
    let mut held = Vec::new();
    for w in &dataset.windows {
        if w.subject_id == subject_id {
            held.push(w.clone());
        } else {
            train.push(w.clone());
        }
    }
    Ok((Dataset::from_windows(train), Dataset::from_windows(held)))
}

// -- cache -----------------------------------------------------------

/// Persist a dataset: JSON index plus one raw block per window.
pub fn save_dataset<T: Scalar>(path: &Path, dataset: &Dataset<T>) -> Result<()> {
    let index: Vec<serde_json::Value> = dataset
        .windows
        .iter()
        .map(|w| {
            serde_json::json!({
                "subject": w.subject_id,
                "label": w.label.as_u8(),
                "file": w.file,
                "start_offset": w.start_offset,
                "start_sample": w.start_sample,
                "fs": w.fs,
                "len": w.samples.shape()[1],
            })
        })
        .collect();
    let meta = serde_json::json!({
        "kind": "dataset",
        "windows": index,
    });
    let blocks: Vec<Vec<u8>> = dataset
        .windows
        .iter()
        .map(|w| container::f64s_to_bytes(&w.samples.to_f64().into_data()))
        .collect();
    let refs: Vec<&[u8]> = blocks.iter().map(|b| b.as_slice()).collect();
    container::write_container(path, &meta, &refs)
}

pub fn load_dataset<T: Scalar>(path: &Path) -> Result<Dataset<T>> {
    let (meta, blocks) = container::read_container(path)?;
    if meta["kind"] != "dataset" {
        return Err(Error::dataset(format!("{} is not a dataset cache", path.display())));
    }
    let index = meta["windows"]
        .as_array()
        .ok_or_else(|| Error::dataset("dataset cache missing window index"))?;
    if index.len() != blocks.len() {
        return Err(Error::dataset(format!(
            "index lists {} windows but {} blocks stored",
            index.len(),
            blocks.len()
        )));
    }
    let mut windows = Vec::with_capacity(index.len());
    for (entry, block) in index.iter().zip(&blocks) {
        let n = entry["len"]
            .as_u64()
            .ok_or_else(|| Error::dataset("window entry missing len"))? as usize;
        let values = container::bytes_to_f64s(block)?;
        if values.len() != 23 * n {
            return Err(Error::dataset(format!(
                "window block holds {} values, expected {}",
                values.len(),
                23 * n
            )));
        }
        let samples = Tensor::from_f64(&Tensor::from_vec(&[23, n], values)?);
        windows.push(LabeledWindow {
            subject_id: entry["subject"].as_u64().unwrap_or(0) as u32,
            label: Label::from_u8(entry["label"].as_u64().unwrap_or(255) as u8)?,
            file: entry["file"].as_str().unwrap_or_default().to_string(),
            start_offset: entry["start_offset"].as_f64().unwrap_or(0.0),
            start_sample: entry["start_sample"].as_u64().unwrap_or(0) as usize,
            fs: entry["fs"].as_f64().unwrap_or(0.0),
            samples,
        });
    }
    Ok(Dataset::from_windows(windows))
}

/// Audit CSV of the window index.
pub fn write_index_csv<T: Scalar, W: Write>(out: &mut W, dataset: &Dataset<T>) -> Result<()> {
    writeln!(out, "subject,label,file,start_offset,start_sample")?;
    for w in &dataset.windows {
        writeln!(
            out,
            "{},{},{},{},{}",
            w.subject_id,
            w.label.as_u8(),
            w.file,
            w.start_offset,
            w.start_sample
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edf::SeizureAnnotations;
    use chrono::NaiveDate;

    fn datetime(h: u32, m: u32, s: u32) -> chrono::NaiveDateTime {
        NaiveDate::from_ymd_opt(2014, 3, 5)
            .unwrap()
            .and_hms_opt(h, m, s)
            .unwrap()
    }

    fn recording(
        subject: u32,
        file: &str,
        fs: f64,
        secs: f64,
        seizures: Vec<(f64, f64)>,
        start: chrono::NaiveDateTime,
    ) -> EegRecording<f64> {
        let l = (fs * secs) as usize;
        let data: Vec<f64> = (0..23 * l).map(|i| (i % 17) as f64 * 0.01).collect();
        EegRecording {
            subject_id: subject,
            channels: Tensor::from_vec(&[23, l], data).unwrap(),
            fs,
            start_datetime: start,
            annotations: SeizureAnnotations {
                file_name: file.to_string(),
                seizure_intervals: seizures,
            },
        }
    }

    fn small_policy() -> LabelPolicy {
        LabelPolicy {
            preictal_horizon: 30.0,
            interictal_exclusion: 100.0,
            window_len: 2.0,
            preictal_overlap: 0.5,
            interictal_overlap: 0.0,
        }
    }

    /// Default-policy boundary cases worked by hand around an onset at
    /// 5000 s (seizure end 5040 s).
    #[test]
    fn classification_boundaries() {
        let policy = LabelPolicy::default();
        let events = [(5000.0, 5040.0)];
        assert_eq!(
            classify_window(3500.0, &events, &policy),
            Some(Label::Preictal)
        );
        assert_eq!(classify_window(500.0, &events, &policy), None);
        assert_eq!(
            classify_window(20000.0, &events, &policy),
            Some(Label::Interictal)
        );
        // Earliest pre-ictal start is exactly horizon before onset.
        assert_eq!(
            classify_window(1400.0, &events, &policy),
            Some(Label::Preictal)
        );
        assert_eq!(classify_window(1399.9, &events, &policy), None);
        // A window must end by the onset to count as pre-ictal.
        assert_eq!(
            classify_window(4990.0, &events, &policy),
            Some(Label::Preictal)
        );
        assert_eq!(classify_window(4990.1, &events, &policy), None);
        // Ictal overlap is dropped outright.
        assert_eq!(classify_window(5005.0, &events, &policy), None);
        assert_eq!(classify_window(5039.9, &events, &policy), None);
        // Interictal needs strictly more than the exclusion after the
        // offset (or before the onset).
        assert_eq!(classify_window(19440.0, &events, &policy), None);
        assert_eq!(
            classify_window(19440.1, &events, &policy),
            Some(Label::Interictal)
        );
        // No seizures at all: everything is interictal.
        assert_eq!(classify_window(7.0, &[], &policy), Some(Label::Interictal));
    }

    #[test]
    fn window_strides_follow_the_overlaps() {
        let policy = small_policy();
        // Onset at 60 s, offset 70 s, 300 s at 16 Hz.
        let rec = recording(1, "a.edf", 16.0, 300.0, vec![(60.0, 70.0)], datetime(8, 0, 0));
        let windows = label_windows(&rec, &policy).unwrap();

        let pre: Vec<f64> = windows
            .iter()
            .filter(|w| w.label == Label::Preictal)
            .map(|w| w.start_offset)
            .collect();
        // Pre-ictal grid steps by 1.5 s; starts within [30, 58].
        assert_eq!(pre, vec![30.0, 31.5, 33.0, 34.5, 36.0, 37.5, 39.0, 40.5, 42.0, 43.5, 45.0, 46.5, 48.0, 49.5, 51.0, 52.5, 54.0, 55.5, 57.0]);

        let inter: Vec<f64> = windows
            .iter()
            .filter(|w| w.label == Label::Interictal)
            .map(|w| w.start_offset)
            .collect();
        // Interictal grid steps by the full 2 s window; distance from
        // the offset at 70 must exceed 100 -> starts at 172, ends by
        // 300 (window 298 would not fit the <= rule at 170.x).
        assert!(inter.iter().all(|&t| t > 170.0 && t + 2.0 <= 300.0));
        assert_eq!(inter[0], 172.0);
        assert_eq!(inter[1] - inter[0], 2.0);

        // Every window body lies inside the file.
        for w in &windows {
            assert!(w.start_offset + policy.window_len <= 300.0);
            assert_eq!(w.samples.shape(), &[23, 32]);
        }
    }

    #[test]
    fn window_samples_must_be_integral() {
        let policy = LabelPolicy {
            window_len: 0.3,
            preictal_overlap: 0.1,
            ..small_policy()
        };
        // 0.3 s * 18.5 Hz = 5.55 samples.
        let rec = recording(1, "a.edf", 18.5, 50.0, vec![], datetime(8, 0, 0));
        assert!(label_windows(&rec, &policy).is_err());
    }

    /// Independent re-derivation of the policy predicate; every window
    /// label must agree, and the window grids must be complete.
    #[test]
    fn label_soundness_oracle() {
        let policy = small_policy();
        for seed in [1u64, 2, 3] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let onset = rng.gen_range(40.0..200.0f64).round();
            let offset = onset + rng.gen_range(5.0..15.0f64).round();
            let rec = recording(2, "b.edf", 16.0, 400.0, vec![(onset, offset)], datetime(9, 0, 0));
            let windows = label_windows(&rec, &policy).unwrap();

            let oracle = |t: f64| -> Option<Label> {
                let end = t + 2.0;
                let ictal = t < offset && end > onset;
                let preictal = t >= onset - 30.0 && end <= onset;
                let far = (t > onset + 100.0 || onset > end + 100.0)
                    && (t > offset + 100.0 || offset > end + 100.0);
                if ictal {
                    None
                } else if preictal {
                    Some(Label::Preictal)
                } else if far {
                    Some(Label::Interictal)
                } else {
                    None
                }
            };

            for w in &windows {
                assert_eq!(oracle(w.start_offset), Some(w.label), "t={}", w.start_offset);
            }

            // Completeness: walk both grids and count matches.
            let expected_pre = (0..)
                .map(|i| i as f64 * 1.5)
                .take_while(|t| t + 2.0 <= 400.0)
                .filter(|&t| oracle(t) == Some(Label::Preictal))
                .count();
            let expected_inter = (0..)
                .map(|i| i as f64 * 2.0)
                .take_while(|t| t + 2.0 <= 400.0)
                .filter(|&t| oracle(t) == Some(Label::Interictal))
                .count();
            assert_eq!(
                windows.iter().filter(|w| w.label == Label::Preictal).count(),
                expected_pre
            );
            assert_eq!(
                windows.iter().filter(|w| w.label == Label::Interictal).count(),
                expected_inter
            );
        }
    }

    /// A seizure early in the subject's next file makes the tail of the
    /// previous file pre-ictal through timestamp chaining.
    #[test]
    fn chaining_pulls_events_across_files() {
        let r1 = recording(3, "c1.edf", 16.0, 200.0, vec![], datetime(8, 0, 0));
        // Starts 600 s after r1, seizure onset 50 s in -> 650 s in r1's
        // clock.
        let r2 = recording(3, "c2.edf", 16.0, 200.0, vec![(50.0, 60.0)], datetime(8, 10, 0));
        let recs = vec![r1, r2];

        let events = chained_events(&recs, 0);
        assert_eq!(events, vec![(650.0, 660.0)]);

        let policy = LabelPolicy {
            preictal_horizon: 700.0,
            interictal_exclusion: 800.0,
            ..small_policy()
        };
        let windows = label_windows_with_events(&recs[0], &events, &policy).unwrap();
        assert!(!windows.is_empty());
        assert!(windows.iter().all(|w| w.label == Label::Preictal));

        // Without chaining the same file would read as all interictal.
        let solo = label_windows(&recs[0], &policy).unwrap();
        assert!(solo.iter().all(|w| w.label == Label::Interictal));
    }

    fn toy_dataset(per_subject: &[(u32, usize)]) -> Dataset<f64> {
        let mut windows = Vec::new();
        for &(subject, count) in per_subject {
            for i in 0..count {
                windows.push(LabeledWindow {
                    subject_id: subject,
                    label: if i % 2 == 0 { Label::Preictal } else { Label::Interictal },
                    file: format!("s{subject}.edf"),
                    start_offset: i as f64 * 10.0,
                    start_sample: i * 160,
                    fs: 16.0,
                    samples: Tensor::filled(&[23, 32], subject as f64 + i as f64 * 0.001),
                });
            }
        }
        Dataset::from_windows(windows)
    }

    #[test]
    fn balancing_subsamples_the_majority() {
        let policy = small_policy();
        let rec = recording(1, "a.edf", 16.0, 600.0, vec![(60.0, 70.0)], datetime(8, 0, 0));
        let rec2 = recording(2, "b.edf", 16.0, 600.0, vec![(500.0, 510.0)], datetime(9, 0, 0));
        let ds = build_balanced_dataset(&[rec, rec2], &policy, 5).unwrap();
        assert_eq!(ds.class_counts[0], ds.class_counts[1]);
        assert!(ds.is_balanced());
        assert!(ds.subject_counts.contains_key(&1) && ds.subject_counts.contains_key(&2));

        // Same seed, same multiset.
        let policy2 = small_policy();
        let rec = recording(1, "a.edf", 16.0, 600.0, vec![(60.0, 70.0)], datetime(8, 0, 0));
        let rec2 = recording(2, "b.edf", 16.0, 600.0, vec![(500.0, 510.0)], datetime(9, 0, 0));
        let ds2 = build_balanced_dataset(&[rec, rec2], &policy2, 5).unwrap();
        let key = |d: &Dataset<f64>| {
            d.windows
                .iter()
                .map(|w| (w.file.clone(), w.start_sample, w.label.as_u8()))
                .collect::<Vec<_>>()
        };
        assert_eq!(key(&ds), key(&ds2));

        let ds3 = build_balanced_dataset(
            &[
                recording(1, "a.edf", 16.0, 600.0, vec![(60.0, 70.0)], datetime(8, 0, 0)),
                recording(2, "b.edf", 16.0, 600.0, vec![(500.0, 510.0)], datetime(9, 0, 0)),
            ],
            &policy,
            6,
        )
        .unwrap();
        assert_ne!(key(&ds), key(&ds3));
    }

    #[test]
    fn balancing_degenerate_keeps_all() {
        // Exclusion so tight that interictal dominates nothing: a file
        // with one seizure and short tails yields few interictal
        // windows.
        let policy = LabelPolicy {
            preictal_horizon: 50.0,
            interictal_exclusion: 60.0,
            ..small_policy()
        };
        let rec = recording(1, "a.edf", 16.0, 140.0, vec![(70.0, 80.0)], datetime(8, 0, 0));
        let ds = build_balanced_dataset(&[rec], &policy, 1).unwrap();
        let pre = ds.class_counts[1];
        let inter = ds.class_counts[0];
        assert!(inter < pre, "expected minority interictal, got {inter} vs {pre}");
        assert!(inter > 0);
    }

    #[test]
    fn balancing_requires_both_classes() {
        let policy = small_policy();
        let rec = recording(1, "a.edf", 16.0, 100.0, vec![], datetime(8, 0, 0));
        assert!(build_balanced_dataset(&[rec], &policy, 0).is_err());
    }

    #[test]
    fn folds_partition_with_near_equal_sizes() {
        let ds = toy_dataset(&[(1, 50), (2, 50)]);
        let plan = make_folds(&ds, 10, 3).unwrap();
        assert_eq!(plan.sizes(), vec![10; 10]);

        let ds = toy_dataset(&[(1, 51), (2, 50)]);
        let plan = make_folds(&ds, 10, 3).unwrap();
        let mut sizes = plan.sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![10, 10, 10, 10, 10, 10, 10, 10, 10, 11]);

        // Partition: every index appears in exactly one fold.
        let mut seen = vec![false; ds.len()];
        for f in 0..10 {
            for i in plan.fold_indices(f) {
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
        for f in 0..10 {
            assert_eq!(
                plan.fold_indices(f).len() + plan.train_indices(f).len(),
                ds.len()
            );
        }

        assert!(make_folds(&ds, 1, 0).is_err());
        assert!(make_folds(&toy_dataset(&[(1, 4)]), 5, 0).is_err());
    }

    #[test]
    fn pairs_are_sound_and_exactly_balanced() {
        let ds = toy_dataset(&[(1, 40), (2, 40), (3, 20)]);
        let stream = mine_pairs(&ds, 9).unwrap();
        assert_eq!(stream.pairs.len(), 100);
        assert!((stream.same_fraction() - 0.5).abs() <= 1.0 / 100.0);
        let mut seen_primary = vec![0usize; ds.len()];
        for p in &stream.pairs {
            assert_ne!(p.primary, p.secondary);
            let sa = ds.windows[p.primary].subject_id;
            let sb = ds.windows[p.secondary].subject_id;
            assert_eq!(p.same_patient, sa == sb);
            seen_primary[p.primary] += 1;
        }
        // Each window is a primary exactly once.
        assert!(seen_primary.iter().all(|&c| c == 1));

        let again = mine_pairs(&ds, 9).unwrap();
        assert_eq!(
            stream.pairs.iter().map(|p| (p.primary, p.secondary)).collect::<Vec<_>>(),
            again.pairs.iter().map(|p| (p.primary, p.secondary)).collect::<Vec<_>>()
        );
    }

    #[test]
    fn pair_mining_edge_cases() {
        assert!(mine_pairs(&toy_dataset(&[(1, 10)]), 0).is_err());
        // Two single-window subjects: the first same-slot cannot be
        // satisfied.
        assert!(mine_pairs(&toy_dataset(&[(1, 1), (2, 1)]), 0).is_err());

        let ds = toy_dataset(&[(1, 2), (2, 2)]);
        let stream = mine_pairs(&ds, 4).unwrap();
        assert_eq!(stream.pairs.len(), 4);
        assert!((stream.same_fraction() - 0.5).abs() <= 0.25);
    }

    #[test]
    fn large_stream_fraction_is_tight() {
        let ds = toy_dataset(&[(1, 400), (2, 300), (3, 300)]);
        let stream = mine_pairs(&ds, 11).unwrap();
        assert_eq!(stream.pairs.len(), 1000);
        let f = stream.same_fraction();
        assert!((0.48..=0.52).contains(&f), "fraction {f}");
    }

    #[test]
    fn lopo_partitions_by_subject() {
        let ds = toy_dataset(&[(1, 10), (2, 8), (3, 6)]);
        let (train, held) = split_lopo(&ds, 2).unwrap();
        assert_eq!(held.len(), 8);
        assert_eq!(train.len() + held.len(), ds.len());
        assert!(held.windows.iter().all(|w| w.subject_id == 2));
        assert!(train.windows.iter().all(|w| w.subject_id != 2));
        assert_eq!(train.subjects(), vec![1, 3]);

        assert!(split_lopo(&ds, 9).is_err());
    }

    #[test]
    fn cache_round_trip_is_bit_exact() {
        let ds = toy_dataset(&[(1, 3), (4, 2)]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("windows.bin");
        save_dataset(&path, &ds).unwrap();
        let back: Dataset<f64> = load_dataset(&path).unwrap();
        assert_eq!(back.len(), ds.len());
        assert_eq!(back.class_counts, ds.class_counts);
        for (a, b) in ds.windows.iter().zip(&back.windows) {
            assert_eq!(a.subject_id, b.subject_id);
            assert_eq!(a.label, b.label);
            assert_eq!(a.file, b.file);
            assert_eq!(a.start_sample, b.start_sample);
            assert_eq!(a.samples.data(), b.samples.data());
        }
    }

    #[test]
    fn index_csv_lists_every_window() {
        let ds = toy_dataset(&[(1, 2)]);
        let mut buf = Vec::new();
        write_index_csv(&mut buf, &ds).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.trim().lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "subject,label,file,start_offset,start_sample");
        assert_eq!(lines[1], "1,1,s1.edf,0,0");
        assert_eq!(lines[2], "1,0,s1.edf,10,160");
    }
}
