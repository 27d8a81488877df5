//! Recording → analysis-ready epochs: resample to the target rate, band-pass,
//! remove per-channel DC, cut fixed-length windows.

use crate::dsp::fir;
use crate::dsp::sos::SosFilter;
use crate::ingest::Recording;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Effective order of the band-pass (16 poles as 8 sections). High enough
/// that a 60 Hz tone leaves ≤1% of its RMS after the bi-directional pass.
const BANDPASS_PROTOTYPE_ORDER: usize = 8;

/// Largest numerator/denominator accepted when expressing a resampling ratio.
const MAX_RESAMPLE_DEN: u64 = 1000;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocConfig {
    pub target_rate_hz: f64,
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    pub epoch_seconds: f64,
    /// Fraction of an epoch shared with its successor, in `[0, 1)`.
    pub epoch_overlap_fraction: f64,
}

impl Default for PreprocConfig {
    fn default() -> Self {
        Self {
            target_rate_hz: 256.0,
            band_low_hz: 0.5,
            band_high_hz: 45.0,
            epoch_seconds: 4.0,
            epoch_overlap_fraction: 0.0,
        }
    }
}

impl PreprocConfig {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        if !(self.target_rate_hz > 0.0) {
            return Err(PreprocessError::NonPositiveRate);
        }
        if !(0.0 < self.band_low_hz
            && self.band_low_hz < self.band_high_hz
            && self.band_high_hz < self.target_rate_hz / 2.0)
        {
            return Err(PreprocessError::BandOutOfRange {
                low: self.band_low_hz,
                high: self.band_high_hz,
                nyquist: self.target_rate_hz / 2.0,
            });
        }
        if !(self.epoch_seconds > 0.0) {
            return Err(PreprocessError::InvalidConfig("epoch_seconds must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.epoch_overlap_fraction) {
            return Err(PreprocessError::InvalidConfig(
                "epoch_overlap_fraction must be in [0, 1)".into(),
            ));
        }
        Ok(())
    }

    pub fn epoch_len_samples(&self) -> usize {
        (self.epoch_seconds * self.target_rate_hz).round() as usize
    }
}

/// One analysis window: C×T_e, per-channel zero mean, at the target rate.
#[derive(Debug, Clone)]
pub struct Epoch {
    pub subject_id: String,
    pub session_id: String,
    pub label: usize,
    pub sample_rate_hz: f64,
    pub data: Array2<f64>,
}

#[derive(Debug)]
pub enum PreprocessError {
    /// Rate ratio not expressible as p/q with p, q ≤ 1000.
    IrrationalRatio { from_hz: f64, to_hz: f64 },
    NonPositiveRate,
    BandOutOfRange { low: f64, high: f64, nyquist: f64 },
    RecordingTooShort { samples: usize, needed: usize },
    /// Recording is not at the configured rate (resample first).
    RateMismatch { actual: f64, expected: f64 },
    InvalidConfig(String),
}

impl fmt::Display for PreprocessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::IrrationalRatio { from_hz, to_hz } => write!(
                f,
                "resampling {from_hz} Hz -> {to_hz} Hz is not a ratio of integers <= {MAX_RESAMPLE_DEN}"
            ),
            Self::NonPositiveRate => write!(f, "sample rate must be positive"),
            Self::BandOutOfRange { low, high, nyquist } => {
                write!(f, "band [{low}, {high}] Hz not inside (0, {nyquist}) Hz")
            }
            Self::RecordingTooShort { samples, needed } => {
                write!(f, "recording has {samples} samples, epoching needs {needed}")
            }
            Self::RateMismatch { actual, expected } => {
                write!(f, "recording at {actual} Hz, expected {expected} Hz")
            }
            Self::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
        }
    }
}

impl std::error::Error for PreprocessError {}

/// Polyphase rational resampling of every channel. Pass-through (bit-exact)
/// when the rates already match.
pub fn resample(rec: &Recording, target_rate_hz: f64) -> Result<Recording, PreprocessError> {
    if !(target_rate_hz > 0.0) || !(rec.sample_rate_hz > 0.0) {
        return Err(PreprocessError::NonPositiveRate);
    }
    if rec.sample_rate_hz == target_rate_hz {
        return Ok(rec.clone());
    }
    let ratio = target_rate_hz / rec.sample_rate_hz;
    let (up, down) = fir::rational_approx(ratio, MAX_RESAMPLE_DEN, 1e-9).ok_or(
        PreprocessError::IrrationalRatio { from_hz: rec.sample_rate_hz, to_hz: target_rate_hz },
    )?;

    let (c, t) = (rec.n_channels(), rec.n_samples());
    let out_len = (t * up as usize).div_ceil(down as usize);
    let mut data = Array2::<f64>::zeros((c, out_len));
    for ch in 0..c {
        let row: Vec<f64> = rec.data.row(ch).to_vec();
        let resampled = fir::resample_channel(&row, up as usize, down as usize);
        for (i, v) in resampled.into_iter().enumerate() {
            data[[ch, i]] = v;
        }
    }
    Ok(Recording { data, sample_rate_hz: target_rate_hz, ..rec.clone() })
}

/// Zero-phase Butterworth band-pass, each channel independently.
pub fn bandpass(rec: &Recording, low_hz: f64, high_hz: f64) -> Result<Recording, PreprocessError> {
    let nyquist = rec.sample_rate_hz / 2.0;
    if !(0.0 < low_hz && low_hz < high_hz && high_hz < nyquist) {
        return Err(PreprocessError::BandOutOfRange { low: low_hz, high: high_hz, nyquist });
    }
    let filter =
        SosFilter::butterworth_bandpass(BANDPASS_PROTOTYPE_ORDER, low_hz, high_hz, rec.sample_rate_hz);
    let mut out = rec.clone();
    for ch in 0..rec.n_channels() {
        let row: Vec<f64> = rec.data.row(ch).to_vec();
        let filtered = filter.filtfilt(&row);
        for (i, v) in filtered.into_iter().enumerate() {
            out.data[[ch, i]] = v;
        }
    }
    Ok(out)
}

/// Subtracts each channel's arithmetic mean.
pub fn center_dc(rec: &Recording) -> Recording {
    let mut out = rec.clone();
    for mut row in out.data.rows_mut() {
        let mean = row.sum() / row.len() as f64;
        row.mapv_inplace(|v| v - mean);
    }
    out
}

/// Cuts contiguous windows of the configured length, dropping any trailing
/// remainder, and re-centers each window per channel.
pub fn epoch(rec: &Recording, cfg: &PreprocConfig) -> Result<Vec<Epoch>, PreprocessError> {
    cfg.validate()?;
    if (rec.sample_rate_hz - cfg.target_rate_hz).abs() > 1e-6 {
        return Err(PreprocessError::RateMismatch {
            actual: rec.sample_rate_hz,
            expected: cfg.target_rate_hz,
        });
    }
    let t_e = cfg.epoch_len_samples();
    let t = rec.n_samples();
    if t < t_e {
        return Err(PreprocessError::RecordingTooShort { samples: t, needed: t_e });
    }
    let stride = ((t_e as f64) * (1.0 - cfg.epoch_overlap_fraction)).round().max(1.0) as usize;

    let mut epochs = Vec::new();
    let mut start = 0;
    while start + t_e <= t {
        let mut data = rec.data.slice(ndarray::s![.., start..start + t_e]).to_owned();
        for mut row in data.rows_mut() {
            let mean = row.sum() / row.len() as f64;
            row.mapv_inplace(|v| v - mean);
        }
        epochs.push(Epoch {
            subject_id: rec.subject_id.clone(),
            session_id: rec.session_id.clone(),
            label: rec.label,
            sample_rate_hz: rec.sample_rate_hz,
            data,
        });
        start += stride;
    }
    Ok(epochs)
}
