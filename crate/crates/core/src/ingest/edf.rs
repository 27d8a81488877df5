//! EDF (European Data Format) reader.
//!
//! Layout: 256-byte main header, then `ns` signal headers stored as field
//! arrays (all labels, then all transducers, …), then data records of
//! 16-bit little-endian two's-complement samples interleaved by signal.
//! Only reading is supported; the test suite carries its own independent
//! byte-level writer for fixtures.

use super::{IngestError, Recording};
use ndarray::Array2;
use std::fs;
use std::path::Path;

const MAIN_HEADER_LEN: usize = 256;
const SIGNAL_HEADER_LEN: usize = 256;
const ANNOTATION_LABEL: &str = "EDF Annotations";

struct SignalHeader {
    label: String,
    phys_min: f64,
    phys_max: f64,
    dig_min: i32,
    dig_max: i32,
    samples_per_record: usize,
}

/// Parses an EDF file into a [`Recording`].
///
/// Physical scaling is `phys_min + (phys_max−phys_min)/(dig_max−dig_min)·(d−dig_min)`
/// per signal. Annotation signals are dropped. `subject_id` and `label` are
/// left for the caller to fill from a manifest; `session_id` defaults to the
/// file stem.
pub fn read_edf<P: AsRef<Path>>(path: P) -> Result<Recording, IngestError> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let session_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_edf(&bytes, session_id)
}

fn parse_edf(bytes: &[u8], session_id: String) -> Result<Recording, IngestError> {
    if bytes.len() < MAIN_HEADER_LEN {
        return Err(IngestError::MalformedHeader(format!(
            "file too short for main header ({} bytes)",
            bytes.len()
        )));
    }

    let field = |offset: usize, len: usize| -> Result<&str, IngestError> {
        let raw = &bytes[offset..offset + len];
        std::str::from_utf8(raw)
            .map(str::trim)
            .map_err(|_| IngestError::MalformedHeader(format!("non-ASCII field at offset {offset}")))
    };

    let version = field(0, 8)?;
    if version != "0" {
        return Err(IngestError::MalformedHeader(format!(
            "version field {version:?}, expected \"0\""
        )));
    }

    let header_bytes: usize = parse_num(field(184, 8)?, "header byte count")?;
    let num_records: i64 = parse_num(field(236, 8)?, "number of data records")?;
    let record_duration: f64 = parse_num(field(244, 8)?, "record duration")?;
    let ns: usize = parse_num(field(252, 4)?, "signal count")?;

    if ns == 0 {
        return Err(IngestError::MalformedHeader("zero signals declared".into()));
    }
    if num_records < 1 {
        return Err(IngestError::MalformedHeader(format!(
            "{num_records} data records declared"
        )));
    }
    if !(record_duration > 0.0) {
        return Err(IngestError::MalformedHeader(format!(
            "non-positive record duration {record_duration}"
        )));
    }
    let expected_header = MAIN_HEADER_LEN + ns * SIGNAL_HEADER_LEN;
    if header_bytes != expected_header {
        return Err(IngestError::MalformedHeader(format!(
            "header byte count {header_bytes} != 256 + ns*256 = {expected_header}"
        )));
    }
    if bytes.len() < expected_header {
        return Err(IngestError::MalformedHeader(format!(
            "file too short for {ns} signal headers"
        )));
    }

    // Signal headers are column-major: all values of one field, then the next.
    let sig_field = |field_offset: usize, field_len: usize, i: usize| -> Result<&str, IngestError> {
        field(MAIN_HEADER_LEN + field_offset * ns + field_len * i, field_len)
    };
    let mut signals = Vec::with_capacity(ns);
    for i in 0..ns {
        let label = sig_field(0, 16, i)?.to_string();
        let phys_min: f64 = parse_num(sig_field(16 + 80 + 8, 8, i)?, "physical minimum")?;
        let phys_max: f64 = parse_num(sig_field(16 + 80 + 16, 8, i)?, "physical maximum")?;
        let dig_min: i32 = parse_num(sig_field(16 + 80 + 24, 8, i)?, "digital minimum")?;
        let dig_max: i32 = parse_num(sig_field(16 + 80 + 32, 8, i)?, "digital maximum")?;
        let samples_per_record: usize =
            parse_num(sig_field(16 + 80 + 40 + 80, 8, i)?, "samples per record")?;
        if samples_per_record == 0 {
            return Err(IngestError::MalformedHeader(format!(
                "signal {i} declares zero samples per record"
            )));
        }
        signals.push(SignalHeader { label, phys_min, phys_max, dig_min, dig_max, samples_per_record });
    }

    let kept: Vec<usize> = (0..ns).filter(|&i| signals[i].label != ANNOTATION_LABEL).collect();
    if kept.is_empty() {
        return Err(IngestError::MalformedHeader("no data signals (annotations only)".into()));
    }
    for &i in &kept {
        if signals[i].dig_max == signals[i].dig_min {
            return Err(IngestError::DegenerateScaling { signal: i });
        }
    }
    let spr0 = signals[kept[0]].samples_per_record;
    if kept.iter().any(|&i| signals[i].samples_per_record != spr0) {
        return Err(IngestError::HeterogeneousRate);
    }
    let sample_rate_hz = spr0 as f64 / record_duration;

    let num_records = num_records as usize;
    let samples_per_full_record: usize = signals.iter().map(|s| s.samples_per_record).sum();
    let expected_data = num_records * samples_per_full_record * 2;
    let actual_data = bytes.len() - expected_header;
    if actual_data < expected_data {
        return Err(IngestError::TruncatedData {
            expected: expected_header + expected_data,
            actual: bytes.len(),
        });
    }

    let t_total = num_records * spr0;
    let mut data = Array2::<f64>::zeros((kept.len(), t_total));
    let payload = &bytes[expected_header..];
    // Per-record byte offset of each signal's sample block.
    let mut sig_offsets = vec![0usize; ns];
    {
        let mut acc = 0;
        for i in 0..ns {
            sig_offsets[i] = acc;
            acc += signals[i].samples_per_record * 2;
        }
    }
    for rec in 0..num_records {
        let rec_base = rec * samples_per_full_record * 2;
        for (row, &i) in kept.iter().enumerate() {
            let sig = &signals[i];
            let slope = (sig.phys_max - sig.phys_min) / (sig.dig_max - sig.dig_min) as f64;
            let base = rec_base + sig_offsets[i];
            for k in 0..sig.samples_per_record {
                let lo = payload[base + 2 * k];
                let hi = payload[base + 2 * k + 1];
                let digital = i16::from_le_bytes([lo, hi]) as f64;
                data[[row, rec * spr0 + k]] =
                    sig.phys_min + slope * (digital - sig.dig_min as f64);
            }
        }
    }

    let rec = Recording {
        subject_id: String::new(),
        session_id,
        label: 0,
        channels: kept.iter().map(|&i| signals[i].label.clone()).collect(),
        sample_rate_hz,
        data,
    };
    rec.validate()?;
    Ok(rec)
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, IngestError> {
    s.parse()
        .map_err(|_| IngestError::MalformedHeader(format!("{what}: cannot parse {s:?}")))
}
