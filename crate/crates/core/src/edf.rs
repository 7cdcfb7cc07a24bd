//! Minimal EDF reader/writer and the seizure-summary text format.
//!
//! Covers exactly what the CHB-MIT corpus needs: the classic EDF layout
//! (256-byte main header, 256 bytes per signal header, 16-bit
//! little-endian samples), without EDF+ annotations channels or
//! discontinuous records. The summary parser understands the
//! `chbXX-summary.txt` convention: per-file blocks with a seizure count
//! and start/end times in seconds.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};

#[derive(Clone, Debug, PartialEq)]
pub struct SignalHeader {
    pub label: String,
    pub transducer: String,
    pub physical_dimension: String,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i32,
    pub digital_max: i32,
    pub prefiltering: String,
    pub samples_per_record: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecordingHeader {
    pub version: String,
    pub patient_id: String,
    pub recording_id: String,
    pub start_datetime: NaiveDateTime,
    pub n_records: usize,
    pub record_duration: f64,
    pub signals: Vec<SignalHeader>,
}

impl RecordingHeader {
    pub fn n_signals(&self) -> usize {
        self.signals.len()
    }

    /// Bytes occupied by the header block.
    pub fn header_len(&self) -> usize {
        256 * (1 + self.signals.len())
    }

    /// Bytes per data record in the payload.
    pub fn record_len(&self) -> usize {
        self.signals.iter().map(|s| s.samples_per_record * 2).sum()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.n_records as f64 * self.record_duration
    }

    fn validate(&self) -> Result<()> {
        if self.signals.is_empty() {
            return Err(Error::edf("no signals in header"));
        }
        if self.record_duration <= 0.0 {
            return Err(Error::edf(format!(
                "record duration must be positive, got {}",
                self.record_duration
            )));
        }
        for (i, s) in self.signals.iter().enumerate() {
            if !s.physical_min.is_finite() || !s.physical_max.is_finite() {
                return Err(Error::edf(format!("signal {i}: non-finite physical range")));
            }
            if s.digital_min >= s.digital_max {
                return Err(Error::edf(format!(
                    "signal {i}: digital range [{}, {}] is empty",
                    s.digital_min, s.digital_max
                )));
            }
            if s.physical_min == s.physical_max {
                return Err(Error::edf(format!(
                    "signal {i}: degenerate physical range {}",
                    s.physical_min
                )));
            }
            if s.samples_per_record == 0 {
                return Err(Error::edf(format!("signal {i}: zero samples per record")));
            }
        }
        Ok(())
    }
}

fn ascii_field(bytes: &[u8], start: usize, len: usize, what: &str) -> Result<String> {
    let raw = bytes
        .get(start..start + len)
        .ok_or_else(|| Error::edf(format!("truncated header reading {what}")))?;
    if raw.iter().any(|&b| !(0x20..=0x7e).contains(&b)) {
        return Err(Error::edf(format!("non-ASCII byte in {what}")));
    }
    Ok(String::from_utf8_lossy(raw).trim().to_string())
}

fn int_field(bytes: &[u8], start: usize, len: usize, what: &str) -> Result<i64> {
    let s = ascii_field(bytes, start, len, what)?;
    s.parse::<i64>()
        .map_err(|_| Error::edf(format!("{what}: expected integer, got {s:?}")))
}

fn float_field(bytes: &[u8], start: usize, len: usize, what: &str) -> Result<f64> {
    let s = ascii_field(bytes, start, len, what)?;
    s.parse::<f64>()
        .map_err(|_| Error::edf(format!("{what}: expected number, got {s:?}")))
}

fn parse_start_datetime(date: &str, time: &str) -> Result<NaiveDateTime> {
    let d: Vec<&str> = date.split('.').collect();
    let t: Vec<&str> = time.split('.').collect();
    if d.len() != 3 || t.len() != 3 {
        return Err(Error::edf(format!("malformed start stamp {date:?} {time:?}")));
    }
    let num = |s: &str, what: &str| -> Result<u32> {
        s.parse::<u32>()
            .map_err(|_| Error::edf(format!("{what}: expected number, got {s:?}")))
    };
    let (day, month, yy) = (num(d[0], "day")?, num(d[1], "month")?, num(d[2], "year")?);
    // EDF two-digit years: 85-99 are the 1900s, 00-84 the 2000s.
    let year = if yy >= 85 { 1900 + yy } else { 2000 + yy };
    let date = NaiveDate::from_ymd_opt(year as i32, month, day)
        .ok_or_else(|| Error::edf(format!("invalid start date {date:?}")))?;
    date.and_hms_opt(num(t[0], "hour")?, num(t[1], "minute")?, num(t[2], "second")?)
        .ok_or_else(|| Error::edf(format!("invalid start time {time:?}")))
}

/// Decode the 256-byte main header plus all signal headers.
pub fn parse_edf_header(bytes: &[u8]) -> Result<RecordingHeader> {
    if bytes.len() < 256 {
        return Err(Error::edf(format!(
            "file of {} bytes is shorter than the 256-byte header",
            bytes.len()
        )));
    }
    let version = ascii_field(bytes, 0, 8, "version")?;
    let patient_id = ascii_field(bytes, 8, 80, "patient id")?;
    let recording_id = ascii_field(bytes, 88, 80, "recording id")?;
    let start_datetime = parse_start_datetime(
        &ascii_field(bytes, 168, 8, "start date")?,
        &ascii_field(bytes, 176, 8, "start time")?,
    )?;
    let header_bytes = int_field(bytes, 184, 8, "header length")?;
    let n_records = int_field(bytes, 236, 8, "record count")?;
    let record_duration = float_field(bytes, 244, 8, "record duration")?;
    let n_signals = int_field(bytes, 252, 4, "signal count")?;

    if n_signals <= 0 {
        return Err(Error::edf(format!("signal count {n_signals} out of range")));
    }
    if n_records < 0 {
        return Err(Error::edf(format!(
            "record count {n_records} unsupported (unknown-length recordings are not handled)"
        )));
    }
    let ns = n_signals as usize;
    let expected_header = 256 * (1 + ns);
    if header_bytes != expected_header as i64 {
        return Err(Error::edf(format!(
            "header length field {header_bytes} disagrees with {expected_header} for {ns} signals"
        )));
    }
    if bytes.len() < expected_header {
        return Err(Error::edf(format!(
            "truncated signal headers: have {} bytes, need {expected_header}",
            bytes.len()
        )));
    }

    // Signal header fields are stored column-wise: all labels, then all
    // transducers, and so on.
    let mut offset = 256;
    let mut field = |width: usize| {
        let start = offset;
        offset += width * ns;
        start
    };
    let labels = field(16);
    let transducers = field(80);
    let dims = field(8);
    let pmins = field(8);
    let pmaxs = field(8);
    let dmins = field(8);
    let dmaxs = field(8);
    let prefilters = field(80);
    let sprs = field(8);

    let mut signals = Vec::with_capacity(ns);
    for i in 0..ns {
        let spr = int_field(bytes, sprs + 8 * i, 8, "samples per record")?;
        if spr <= 0 {
            return Err(Error::edf(format!("signal {i}: samples per record {spr}")));
        }
        signals.push(SignalHeader {
            label: ascii_field(bytes, labels + 16 * i, 16, "label")?,
            transducer: ascii_field(bytes, transducers + 80 * i, 80, "transducer")?,
            physical_dimension: ascii_field(bytes, dims + 8 * i, 8, "dimension")?,
            physical_min: float_field(bytes, pmins + 8 * i, 8, "physical min")?,
            physical_max: float_field(bytes, pmaxs + 8 * i, 8, "physical max")?,
            digital_min: int_field(bytes, dmins + 8 * i, 8, "digital min")? as i32,
            digital_max: int_field(bytes, dmaxs + 8 * i, 8, "digital max")? as i32,
            prefiltering: ascii_field(bytes, prefilters + 80 * i, 80, "prefiltering")?,
            samples_per_record: spr as usize,
        });
    }

    let header = RecordingHeader {
        version,
        patient_id,
        recording_id,
        start_datetime,
        n_records: n_records as usize,
        record_duration,
        signals,
    };
    header.validate()?;
    Ok(header)
}

/// Samples of one signal in physical units, plus the out-of-range tally.
#[derive(Clone, Debug)]
pub struct DecodedSignal<T> {
    pub samples: Vec<T>,
    /// Digital codes outside [digital_min, digital_max], clamped.
    pub clamped: usize,
}

/// Decode signal `signal_index` from the payload that follows the header.
///
/// Codes map affinely onto the physical range; the range endpoints map
/// exactly by construction, interior codes via
/// p = physical_min + (d - digital_min) * (physical_max - physical_min)
///     / (digital_max - digital_min).
pub fn decode_samples<T: Scalar>(
    header: &RecordingHeader,
    payload: &[u8],
    signal_index: usize,
) -> Result<DecodedSignal<T>> {
    let sig = header
        .signals
        .get(signal_index)
        .ok_or_else(|| Error::edf(format!("signal index {signal_index} out of range")))?;
    let record_len = header.record_len();
    let expected = record_len * header.n_records;
    if payload.len() != expected {
        return Err(Error::edf(format!(
            "payload of {} bytes, expected {expected} ({} records of {record_len})",
            payload.len(),
            header.n_records
        )));
    }
    let offset_in_record: usize = header.signals[..signal_index]
        .iter()
        .map(|s| s.samples_per_record * 2)
        .sum();

    let dmin = sig.digital_min;
    let dmax = sig.digital_max;
    let pmin = sig.physical_min;
    let pmax = sig.physical_max;
    let gain = (pmax - pmin) / (dmax - dmin) as f64;

    let mut samples = Vec::with_capacity(header.n_records * sig.samples_per_record);
    let mut clamped = 0usize;
    for r in 0..header.n_records {
        let base = r * record_len + offset_in_record;
        for k in 0..sig.samples_per_record {
            let lo = payload[base + 2 * k];
            let hi = payload[base + 2 * k + 1];
            let mut d = i16::from_le_bytes([lo, hi]) as i32;
            if d < dmin {
                d = dmin;
                clamped += 1;
            } else if d > dmax {
                d = dmax;
                clamped += 1;
            }
            let p = if d == dmin {
                pmin
            } else if d == dmax {
                pmax
            } else {
                pmin + (d - dmin) as f64 * gain
            };
            samples.push(T::from_f64_lossy(p));
        }
    }
    Ok(DecodedSignal { samples, clamped })
}

/// Inverse of the decode map, for building files: physical values to
/// digital codes, rounded to nearest and clamped to the digital range.
pub fn encode_physical(sig: &SignalHeader, samples: &[f64]) -> Vec<i16> {
    let scale = (sig.digital_max - sig.digital_min) as f64 / (sig.physical_max - sig.physical_min);
    samples
        .iter()
        .map(|&p| {
            let d = ((p - sig.physical_min) * scale).round() + sig.digital_min as f64;
            d.clamp(sig.digital_min as f64, sig.digital_max as f64) as i16
        })
        .collect()
}

fn put_field(buf: &mut Vec<u8>, width: usize, value: &str, what: &str) -> Result<()> {
    if value.len() > width {
        return Err(Error::edf(format!(
            "{what} {value:?} exceeds its {width}-byte field"
        )));
    }
    if value.bytes().any(|b| !(0x20..=0x7e).contains(&b)) {
        return Err(Error::edf(format!("{what} contains non-ASCII bytes")));
    }
    buf.extend_from_slice(value.as_bytes());
    buf.extend(std::iter::repeat(b' ').take(width - value.len()));
    Ok(())
}

fn format_number(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e7 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Serialize a complete EDF file from a header and per-signal digital
/// sample vectors (each of length n_records * samples_per_record).
pub fn write_edf(header: &RecordingHeader, digital: &[Vec<i16>]) -> Result<Vec<u8>> {
    header.validate()?;
    if digital.len() != header.signals.len() {
        return Err(Error::edf(format!(
            "{} sample vectors for {} signals",
            digital.len(),
            header.signals.len()
        )));
    }
    for (i, (sig, d)) in header.signals.iter().zip(digital).enumerate() {
        let want = sig.samples_per_record * header.n_records;
        if d.len() != want {
            return Err(Error::edf(format!(
                "signal {i}: {} samples, expected {want}",
                d.len()
            )));
        }
    }

    let mut buf = Vec::with_capacity(header.header_len() + header.record_len() * header.n_records);
    put_field(&mut buf, 8, &header.version, "version")?;
    put_field(&mut buf, 80, &header.patient_id, "patient id")?;
    put_field(&mut buf, 80, &header.recording_id, "recording id")?;
    let dt = header.start_datetime;
    put_field(
        &mut buf,
        8,
        &format!("{:02}.{:02}.{:02}", dt.day(), dt.month(), dt.year() % 100),
        "start date",
    )?;
    put_field(
        &mut buf,
        8,
        &format!("{:02}.{:02}.{:02}", dt.hour(), dt.minute(), dt.second()),
        "start time",
    )?;
    put_field(&mut buf, 8, &header.header_len().to_string(), "header length")?;
    put_field(&mut buf, 44, "", "reserved")?;
    put_field(&mut buf, 8, &header.n_records.to_string(), "record count")?;
    put_field(
        &mut buf,
        8,
        &format_number(header.record_duration),
        "record duration",
    )?;
    put_field(&mut buf, 4, &header.signals.len().to_string(), "signal count")?;

    for s in &header.signals {
        put_field(&mut buf, 16, &s.label, "label")?;
    }
    for s in &header.signals {
        put_field(&mut buf, 80, &s.transducer, "transducer")?;
    }
    for s in &header.signals {
        put_field(&mut buf, 8, &s.physical_dimension, "dimension")?;
    }
    for s in &header.signals {
        put_field(&mut buf, 8, &format_number(s.physical_min), "physical min")?;
    }
    for s in &header.signals {
        put_field(&mut buf, 8, &format_number(s.physical_max), "physical max")?;
    }
    for s in &header.signals {
        put_field(&mut buf, 8, &s.digital_min.to_string(), "digital min")?;
    }
    for s in &header.signals {
        put_field(&mut buf, 8, &s.digital_max.to_string(), "digital max")?;
    }
    for s in &header.signals {
        put_field(&mut buf, 80, &s.prefiltering, "prefiltering")?;
    }
    for s in &header.signals {
        put_field(&mut buf, 8, &s.samples_per_record.to_string(), "samples per record")?;
    }
    for _ in &header.signals {
        put_field(&mut buf, 32, "", "reserved")?;
    }

    for r in 0..header.n_records {
        for (sig, d) in header.signals.iter().zip(digital) {
            let spr = sig.samples_per_record;
            for &code in &d[r * spr..(r + 1) * spr] {
                buf.extend_from_slice(&code.to_le_bytes());
            }
        }
    }
    Ok(buf)
}

// ---------------------------------------------------------------------
// Seizure summary text format
// ---------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SeizureAnnotations {
    pub file_name: String,
    /// (start, end) in seconds from the start of the file.
    pub seizure_intervals: Vec<(f64, f64)>,
}

impl SeizureAnnotations {
    pub fn empty(file_name: impl Into<String>) -> Self {
        SeizureAnnotations {
            file_name: file_name.into(),
            seizure_intervals: Vec::new(),
        }
    }
}

fn seconds_value(line: &str, what: &str) -> Result<f64> {
    let after = line
        .split(':')
        .nth(1)
        .ok_or_else(|| Error::summary(format!("malformed {what} line: {line:?}")))?;
    let token = after
        .trim()
        .split_whitespace()
        .next()
        .ok_or_else(|| Error::summary(format!("missing value in {what} line: {line:?}")))?;
    token
        .parse::<f64>()
        .map_err(|_| Error::summary(format!("{what}: expected seconds, got {token:?}")))
}

/// Parse a CHB-MIT-style summary into one annotation record per file
/// block, in file order. Lines outside the known keys are ignored.
pub fn parse_summary(text: &str) -> Result<Vec<SeizureAnnotations>> {
    struct Block {
        file_name: String,
        declared: Option<usize>,
        starts: Vec<f64>,
        ends: Vec<f64>,
    }

    fn finish(block: Block) -> Result<SeizureAnnotations> {
        let declared = block.declared.ok_or_else(|| {
            Error::summary(format!("file {}: missing seizure count", block.file_name))
        })?;
        if block.starts.len() != declared || block.ends.len() != declared {
            return Err(Error::summary(format!(
                "file {}: declared {declared} seizures but found {} starts and {} ends",
                block.file_name,
                block.starts.len(),
                block.ends.len()
            )));
        }
        let mut intervals = Vec::with_capacity(declared);
        for (&s, &e) in block.starts.iter().zip(&block.ends) {
            if e <= s {
                return Err(Error::summary(format!(
                    "file {}: seizure interval ({s}, {e}) is empty",
                    block.file_name
                )));
            }
            intervals.push((s, e));
        }
        let mut sorted = intervals.clone();
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for w in sorted.windows(2) {
            if w[1].0 < w[0].1 {
                return Err(Error::summary(format!(
                    "file {}: overlapping seizure intervals {:?} and {:?}",
                    block.file_name, w[0], w[1]
                )));
            }
        }
        Ok(SeizureAnnotations {
            file_name: block.file_name,
            seizure_intervals: intervals,
        })
    }

    let mut out = Vec::new();
    let mut current: Option<Block> = None;
    for line in text.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("File Name:") {
            if let Some(block) = current.take() {
                out.push(finish(block)?);
            }
            current = Some(Block {
                file_name: rest.trim().to_string(),
                declared: None,
                starts: Vec::new(),
                ends: Vec::new(),
            });
        } else if line.starts_with("Number of Seizures in File:") {
            let block = current
                .as_mut()
                .ok_or_else(|| Error::summary("seizure count before any File Name"))?;
            let n = seconds_value(line, "seizure count")?;
            if n < 0.0 || n.fract() != 0.0 {
                return Err(Error::summary(format!("bad seizure count in {line:?}")));
            }
            block.declared = Some(n as usize);
        } else if line.starts_with("Seizure") && line.contains("Start Time:") {
            let block = current
                .as_mut()
                .ok_or_else(|| Error::summary("seizure time before any File Name"))?;
            block.starts.push(seconds_value(line, "seizure start")?);
        } else if line.starts_with("Seizure") && line.contains("End Time:") {
            let block = current
                .as_mut()
                .ok_or_else(|| Error::summary("seizure time before any File Name"))?;
            block.ends.push(seconds_value(line, "seizure end")?);
        }
    }
    if let Some(block) = current.take() {
        out.push(finish(block)?);
    }
    Ok(out)
}

/// Render annotations in the summary text convention; single-seizure
/// files use the unnumbered key, multi-seizure files the numbered one.
pub fn write_summary(records: &[SeizureAnnotations]) -> String {
    let mut out = String::new();
    for rec in records {
        out.push_str(&format!("File Name: {}\n", rec.file_name));
        out.push_str(&format!(
            "Number of Seizures in File: {}\n",
            rec.seizure_intervals.len()
        ));
        for (i, (s, e)) in rec.seizure_intervals.iter().enumerate() {
            if rec.seizure_intervals.len() == 1 {
                out.push_str(&format!("Seizure Start Time: {} seconds\n", format_number(*s)));
                out.push_str(&format!("Seizure End Time: {} seconds\n", format_number(*e)));
            } else {
                out.push_str(&format!(
                    "Seizure {} Start Time: {} seconds\n",
                    i + 1,
                    format_number(*s)
                ));
                out.push_str(&format!(
                    "Seizure {} End Time: {} seconds\n",
                    i + 1,
                    format_number(*e)
                ));
            }
        }
        out.push('\n');
    }
    out
}
