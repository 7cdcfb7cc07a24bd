//! From files on disk to in-memory recordings.
//!
//! A dataset manifest is a JSON array of `{edf_path, subject_id,
//! summary_path}` entries. Each EDF is matched against a canonical
//! 23-label channel list, decoded to physical units, and harmonized to
//! exactly 23 channels (22-channel recordings get a per-sample mean
//! channel appended).

use crate::edf::{self, RecordingHeader, SeizureAnnotations};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::{Path, PathBuf};

/// The standard longitudinal bipolar montage of the CHB-MIT corpus.
/// T8-P8 appears twice because the original files carry it twice.
pub const DEFAULT_CHANNEL_LABELS: [&str; 23] = [
    "FP1-F7", "F7-T7", "T7-P7", "P7-O1", "FP1-F3", "F3-C3", "C3-P3", "P3-O1", "FP2-F4", "F4-C4",
    "C4-P4", "P4-O2", "FP2-F8", "F8-T8", "T8-P8", "P8-O2", "FZ-CZ", "CZ-PZ", "P7-T7", "T7-FT9",
    "FT9-FT10", "FT10-T8", "T8-P8",
];

pub fn default_channel_labels() -> Vec<String> {
    DEFAULT_CHANNEL_LABELS.iter().map(|s| s.to_string()).collect()
}

/// Read a channel-label list from a JSON array of strings.
pub fn load_channel_labels(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    let labels: Vec<String> = serde_json::from_str(&text)?;
    if labels.is_empty() {
        return Err(Error::config(format!(
            "channel list {} is empty",
            path.display()
        )));
    }
    Ok(labels)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ManifestEntry {
    pub edf_path: PathBuf,
    pub subject_id: u32,
    pub summary_path: PathBuf,
}

/// Load a manifest; relative paths are resolved against the manifest's
/// own directory so a dataset tree can be moved as a unit.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path)?;
    let mut entries: Vec<ManifestEntry> = serde_json::from_str(&text)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    for e in entries.iter_mut() {
        if e.edf_path.is_relative() {
            e.edf_path = base.join(&e.edf_path);
        }
        if e.summary_path.is_relative() {
            e.summary_path = base.join(&e.summary_path);
        }
    }
    if entries.is_empty() {
        return Err(Error::ingest(format!("manifest {} is empty", path.display())));
    }
    Ok(entries)
}

/// One recording, harmonized to 23 channels of physical-unit samples.
#[derive(Clone, Debug)]
pub struct EegRecording<T> {
    pub subject_id: u32,
    /// Shape [23, L].
    pub channels: Tensor<T>,
    pub fs: f64,
    pub start_datetime: chrono::NaiveDateTime,
    pub annotations: SeizureAnnotations,
}

impl<T> EegRecording<T> {
    pub fn file_name(&self) -> &str {
        &self.annotations.file_name
    }
}

fn normalize_label(label: &str) -> String {
    let up = label.trim().to_uppercase();
    up.strip_prefix("EEG").map(|s| s.trim().to_string()).unwrap_or(up)
}

/// Match the canonical label list against the EDF's signals.
///
/// Returns, per canonical slot, the index of the first not-yet-claimed
/// signal with that label (handles the duplicated T8-P8 naturally), and
/// the list of canonical labels that found no signal.
pub fn match_channels(
    header: &RecordingHeader,
    labels: &[String],
) -> (Vec<(usize, usize)>, Vec<String>) {
    let normalized: Vec<String> = header
        .signals
        .iter()
        .map(|s| normalize_label(&s.label))
        .collect();
    let mut used = vec![false; normalized.len()];
    let mut matched = Vec::new();
    let mut missing = Vec::new();
    for (slot, want) in labels.iter().enumerate() {
        let want = normalize_label(want);
        match (0..normalized.len()).find(|&i| !used[i] && normalized[i] == want) {
            Some(i) => {
                used[i] = true;
                matched.push((slot, i));
            }
            None => missing.push(want),
        }
    }
    (matched, missing)
}

/// C = 23 passes through; C = 22 gains a per-sample mean channel.
pub fn harmonize_channels<T: Scalar>(channels: &Tensor<T>) -> Result<Tensor<T>> {
    if channels.shape().len() != 2 {
        return Err(Error::shape(format!(
            "expected [channels, samples], got {:?}",
            channels.shape()
        )));
    }
    let c = channels.shape()[0];
    let l = channels.shape()[1];
    match c {
        23 => Ok(channels.clone()),
        22 => {
            let inv = T::from_f64_lossy(1.0 / 22.0);
            let mut data = Vec::with_capacity(23 * l);
            data.extend_from_slice(channels.data());
            for t in 0..l {
                let mut sum = T::zero();
                for ch in 0..22 {
                    sum += channels.data()[ch * l + t];
                }
                data.push(sum * inv);
            }
            Tensor::from_vec(&[23, l], data)
        }
        other => Err(Error::ingest(format!(
            "cannot harmonize a {other}-channel recording; need 22 or 23 matched channels"
        ))),
    }
}

/// Assemble one recording from raw EDF bytes plus its annotations.
pub fn load_recording<T: Scalar>(
    edf_bytes: &[u8],
    subject_id: u32,
    labels: &[String],
    annotations: SeizureAnnotations,
) -> Result<EegRecording<T>> {
    if !(1..=24).contains(&subject_id) {
        return Err(Error::ingest(format!("subject id {subject_id} outside [1, 24]")));
    }
    let header = edf::parse_edf_header(edf_bytes)?;
    let payload = &edf_bytes[header.header_len()..];

    let (matched, missing) = match_channels(&header, labels);
    if matched.len() < 22 {
        return Err(Error::ingest(format!(
            "{}: only {} of {} canonical channels present; missing {:?}",
            annotations.file_name,
            matched.len(),
            labels.len(),
            missing
        )));
    }

    let spr = header.signals[matched[0].1].samples_per_record;
    for &(_, idx) in &matched {
        if header.signals[idx].samples_per_record != spr {
            return Err(Error::ingest(format!(
                "{}: matched channels disagree on sampling rate",
                annotations.file_name
            )));
        }
    }
    let fs = spr as f64 / header.record_duration;
    let len = header.n_records * spr;

    let duration = header.duration_seconds();
    for &(s, e) in &annotations.seizure_intervals {
        if s < 0.0 || e > duration {
            return Err(Error::ingest(format!(
                "{}: seizure interval ({s}, {e}) outside the {duration} s recording",
                annotations.file_name
            )));
        }
    }

    let mut data = Vec::with_capacity(matched.len() * len);
    let mut clamped_total = 0usize;
    for &(_, idx) in &matched {
        let decoded = edf::decode_samples::<T>(&header, payload, idx)?;
        clamped_total += decoded.clamped;
        data.extend_from_slice(&decoded.samples);
    }
    if clamped_total > 0 {
        log::warn!(
            "{}: clamped {clamped_total} out-of-range digital codes",
            annotations.file_name
        );
    }

    let channels = harmonize_channels(&Tensor::from_vec(&[matched.len(), len], data)?)?;
    Ok(EegRecording {
        subject_id,
        channels,
        fs,
        start_datetime: header.start_datetime,
        annotations,
    })
}

/// Load every manifest entry; summaries are parsed once per path and
/// looked up by EDF file name.
pub fn load_manifest_recordings<T: Scalar>(
    manifest_path: &Path,
    labels: &[String],
) -> Result<Vec<EegRecording<T>>> {
    let entries = load_manifest(manifest_path)?;
    let mut summaries: HashMap<PathBuf, Vec<SeizureAnnotations>> = HashMap::new();
    let mut out = Vec::with_capacity(entries.len());
    for entry in &entries {
        if !summaries.contains_key(&entry.summary_path) {
            let text = std::fs::read_to_string(&entry.summary_path)?;
            summaries.insert(entry.summary_path.clone(), edf::parse_summary(&text)?);
        }
        let file_name = entry
            .edf_path
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::ingest(format!("bad edf path {:?}", entry.edf_path)))?;
        let annotations = summaries[&entry.summary_path]
            .iter()
            .find(|a| a.file_name == file_name)
            .cloned()
            .ok_or_else(|| {
                Error::ingest(format!(
                    "{} has no block in {}",
                    file_name,
                    entry.summary_path.display()
                ))
            })?;
        let bytes = std::fs::read(&entry.edf_path)?;
        out.push(load_recording(&bytes, entry.subject_id, labels, annotations)?);
    }
    Ok(out)
}
