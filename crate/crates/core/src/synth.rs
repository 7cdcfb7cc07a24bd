//! Synthetic pseudo-patient EEG corpora and on-disk EDF fixtures.
//!
//! The signal recipe keeps every generated window analyzable by the
//! real pipeline: each channel carries a per-patient DC offset, a
//! per-patient signature tone, a class tone (frequency or amplitude
//! coded depending on the corpus), and uniform noise. Random phases
//! make windows distinct while all 23 channels observe the same
//! sources.

use crate::dataset::{Dataset, Label, LabeledWindow};
use crate::edf::{write_edf, write_summary, RecordingHeader, SeizureAnnotations, SignalHeader};
use crate::error::{Error, Result};
use crate::ingest::default_channel_labels;
use crate::models::N_PATIENTS;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use chrono::NaiveDate;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

pub const SYNTH_FS: f64 = 256.0;
pub const WINDOW_SECS: f64 = 10.0;

// Corpus amplitudes sit well below unity so the log-energy features
// stay a few units wide; training the metric models directly on the
// raw cepstral scale diverges long before the step budgets used in
// the tests.
const A_PATIENT: f64 = 0.1;
const A_CLASS: f64 = 0.4;
const A_CLASS_LOUD: f64 = 0.8;
const A_CLASS_QUIET: f64 = 0.1;
const NOISE: f64 = 0.05;

// EDF fixtures use a microvolt-like scale instead so the written
// samples exercise a realistic slice of the +-400 physical range.
const F_DC_UNIT: f64 = 5.0;
const F_PATIENT: f64 = 5.0;
const F_CLASS: f64 = 20.0;
const F_NOISE: f64 = 1.0;

#[derive(Clone, Copy, Debug)]
pub struct ToneSpec {
    pub preictal_hz: f64,
    pub preictal_amp: f64,
    pub interictal_hz: f64,
    pub interictal_amp: f64,
}

/// Shared class content: every patient expresses the same two tones at
/// equal strength, so the class boundary transfers across patients.
pub fn shared_tones() -> ToneSpec {
    ToneSpec {
        preictal_hz: 22.0,
        preictal_amp: A_CLASS,
        interictal_hz: 45.0,
        interictal_amp: A_CLASS,
    }
}

/// Patient-idiosyncratic class coding. Every patient expresses the
/// class tone at the same carrier, but adjacent patients swap which
/// class is loud. A model pretrained with one patient held out sees
/// contradictory amplitude evidence, so the held-out patient's own
/// rule has to come from their windows.
pub fn idiosyncratic_tones(subject: u32) -> ToneSpec {
    const CARRIER: f64 = 30.0;
    let (pre, inter) = if subject % 2 == 1 {
        (A_CLASS_LOUD, A_CLASS_QUIET)
    } else {
        (A_CLASS_QUIET, A_CLASS_LOUD)
    };
    ToneSpec {
        preictal_hz: CARRIER,
        preictal_amp: pre,
        interictal_hz: CARRIER,
        interictal_amp: inter,
    }
}

fn patient_dc(subject: u32) -> f64 {
    0.1 * subject as f64
}

fn patient_tone_hz(subject: u32) -> f64 {
    3.0 + 2.0 * ((subject - 1) % 8) as f64
}

fn patient_rng(seed: u64, subject: u32) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(
        seed.wrapping_mul(0x5851_f42d_4c95_7f2d)
            .wrapping_add(subject as u64),
    )
}

fn tone_window<T: Scalar>(
    rng: &mut ChaCha8Rng,
    subject: u32,
    class_hz: f64,
    class_amp: f64,
    n: usize,
) -> Tensor<T> {
    let phase_p = rng.gen_range(0.0..TAU);
    let phase_c = rng.gen_range(0.0..TAU);
    let dc = patient_dc(subject);
    let fp = patient_tone_hz(subject);
    let mut data = Vec::with_capacity(23 * n);
    for _ch in 0..23 {
        for t in 0..n {
            let ts = t as f64 / SYNTH_FS;
            let v = dc
                + A_PATIENT * (TAU * fp * ts + phase_p).sin()
                + class_amp * (TAU * class_hz * ts + phase_c).sin()
                + rng.gen_range(-NOISE..NOISE);
            data.push(T::from_f64_lossy(v));
        }
    }
    Tensor::from_vec(&[23, n], data).expect("window shape")
}

fn corpus<T: Scalar>(
    n_patients: usize,
    per_class: usize,
    seed: u64,
    tones: impl Fn(u32) -> ToneSpec,
) -> Result<Dataset<T>> {
    if n_patients == 0 || n_patients > N_PATIENTS {
        return Err(Error::config(format!(
            "pseudo-patient count {n_patients} outside 1..={N_PATIENTS}"
        )));
    }
    if per_class == 0 {
        return Err(Error::config("need at least one window per class"));
    }
    let n = (SYNTH_FS * WINDOW_SECS) as usize;
    let mut windows = Vec::new();
    for s in 1..=n_patients as u32 {
        let mut rng = patient_rng(seed, s);
        let spec = tones(s);
        for k in 0..2 * per_class {
            let label = if k % 2 == 0 {
                Label::Preictal
            } else {
                Label::Interictal
            };
            let (hz, amp) = match label {
                Label::Preictal => (spec.preictal_hz, spec.preictal_amp),
                Label::Interictal => (spec.interictal_hz, spec.interictal_amp),
            };
            windows.push(LabeledWindow {
                subject_id: s,
                label,
                file: format!("pseudo{s:02}.edf"),
                start_offset: k as f64 * WINDOW_SECS,
                start_sample: k * n,
                fs: SYNTH_FS,
                samples: tone_window(&mut rng, s, hz, amp, n),
            });
        }
    }
    Ok(Dataset::from_windows(windows))
}

/// Balanced corpus with patient-independent class tones.
pub fn pseudo_corpus<T: Scalar>(
    n_patients: usize,
    per_class: usize,
    seed: u64,
) -> Result<Dataset<T>> {
    corpus(n_patients, per_class, seed, |_| shared_tones())
}

/// Balanced corpus where each patient codes the classes differently.
pub fn idiosyncratic_corpus<T: Scalar>(
    n_patients: usize,
    per_class: usize,
    seed: u64,
) -> Result<Dataset<T>> {
    corpus(n_patients, per_class, seed, idiosyncratic_tones)
}

// -- on-disk fixtures -----------------------------------------------------

#[derive(Clone, Debug)]
pub struct FixturePatient {
    pub subject: u32,
    /// Recording length in seconds (one EDF record per second).
    pub secs: usize,
    /// Seizure (onset, offset) pairs in seconds.
    pub seizures: Vec<(f64, f64)>,
}

/// Continuous recording whose spectral content follows the seizure
/// layout: the class tone switches to pre-ictal inside the hour before
/// each onset (here compressed to 60 s for short fixtures), and ictal
/// spans get wideband noise bursts.
fn fixture_signal(p: &FixturePatient, seed: u64) -> Vec<Vec<f64>> {
    let spec = shared_tones();
    let n = p.secs * SYNTH_FS as usize;
    let mut rng = patient_rng(seed, p.subject);
    let phase_p = rng.gen_range(0.0..TAU);
    let phase_c = rng.gen_range(0.0..TAU);
    let dc = F_DC_UNIT * p.subject as f64;
    let fp = patient_tone_hz(p.subject);
    let mut channels = Vec::with_capacity(23);
    for _ch in 0..23 {
        let mut samples = Vec::with_capacity(n);
        for t in 0..n {
            let ts = t as f64 / SYNTH_FS;
            let preictal = p
                .seizures
                .iter()
                .any(|&(on, _)| ts >= on - 60.0 && ts < on);
            let ictal = p.seizures.iter().any(|&(on, off)| ts >= on && ts <= off);
            let hz = if preictal {
                spec.preictal_hz
            } else {
                spec.interictal_hz
            };
            let mut v = dc
                + F_PATIENT * (TAU * fp * ts + phase_p).sin()
                + F_CLASS * (TAU * hz * ts + phase_c).sin()
                + rng.gen_range(-F_NOISE..F_NOISE);
            if ictal {
                v += rng.gen_range(-80.0..80.0);
            }
            samples.push(v);
        }
        channels.push(samples);
    }
    channels
}

fn fixture_header(p: &FixturePatient) -> RecordingHeader {
    let start = NaiveDate::from_ymd_opt(2012, 1, 1)
        .expect("fixture date")
        .and_hms_opt(0, 0, 0)
        .expect("fixture time")
        + chrono::Duration::hours(p.subject as i64);
    let signals = default_channel_labels()
        .into_iter()
        .map(|label| SignalHeader {
            label,
            transducer: String::new(),
            physical_dimension: "uV".into(),
            physical_min: -400.0,
            physical_max: 400.0,
            digital_min: -32768,
            digital_max: 32767,
            prefiltering: String::new(),
            samples_per_record: SYNTH_FS as usize,
        })
        .collect();
    RecordingHeader {
        version: "0".into(),
        patient_id: format!("chb{:02}", p.subject),
        recording_id: "synthetic".into(),
        start_datetime: start,
        n_records: p.secs,
        record_duration: 1.0,
        signals,
    }
}

/// Serialize one fixture patient to EDF bytes plus its annotations.
pub fn fixture_recording(
    p: &FixturePatient,
    file_name: &str,
    seed: u64,
) -> Result<(Vec<u8>, SeizureAnnotations)> {
    if p.secs == 0 {
        return Err(Error::config("fixture recording needs at least 1 second"));
    }
    let header = fixture_header(p);
    let channels = fixture_signal(p, seed);
    let digital: Vec<Vec<i16>> = header
        .signals
        .iter()
        .zip(&channels)
        .map(|(sig, ch)| crate::edf::encode_physical(sig, ch))
        .collect();
    let bytes = write_edf(&header, &digital)?;
    Ok((
        bytes,
        SeizureAnnotations {
            file_name: file_name.to_string(),
            seizure_intervals: p.seizures.clone(),
        },
    ))
}

/// Write EDF + summary + manifest files under `dir`; returns the
/// manifest path, ready for the ingestion pipeline.
pub fn write_fixture_tree(
    dir: &Path,
    patients: &[FixturePatient],
    seed: u64,
) -> Result<PathBuf> {
    if patients.is_empty() {
        return Err(Error::config("no fixture patients requested"));
    }
    std::fs::create_dir_all(dir)?;
    let mut manifest = Vec::with_capacity(patients.len());
    for p in patients {
        let edf_name = format!("p{:02}.edf", p.subject);
        let sum_name = format!("p{:02}-summary.txt", p.subject);
        let (bytes, ann) = fixture_recording(p, &edf_name, seed)?;
        std::fs::write(dir.join(&edf_name), &bytes)?;
        std::fs::write(dir.join(&sum_name), write_summary(&[ann]))?;
        manifest.push(serde_json::json!({
            "edf_path": edf_name,
            "subject_id": p.subject,
            "summary_path": sum_name,
        }));
    }
    let path = dir.join("manifest.json");
    std::fs::write(
        &path,
        serde_json::to_vec_pretty(&serde_json::Value::Array(manifest))?,
    )?;
    Ok(path)
}
