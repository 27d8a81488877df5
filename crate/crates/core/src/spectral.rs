//! Welch spectral estimation and the frequency-domain feature set: relative
//! band powers over the five canonical EEG bands plus spectral mean/median
//! frequency and spectral entropy.

use crate::preprocess::Epoch;
use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::fmt;

/// Division guard used whenever a power total can be zero.
pub const POWER_EPSILON: f64 = 1e-12;

/// Frequency range the summary statistics are computed over.
pub const SUMMARY_RANGE_HZ: (f64, f64) = (0.5, 45.0);

/// One named frequency band, `[f_min, f_max)` against its neighbours.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandDef {
    pub name: &'static str,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
}

/// The five canonical EEG bands, in feature order δ, θ, α, β, γ.
pub const CANONICAL_BANDS: [BandDef; 5] = [
    BandDef { name: "delta", f_min_hz: 0.5, f_max_hz: 4.0 },
    BandDef { name: "theta", f_min_hz: 4.0, f_max_hz: 8.0 },
    BandDef { name: "alpha", f_min_hz: 8.0, f_max_hz: 13.0 },
    BandDef { name: "beta", f_min_hz: 13.0, f_max_hz: 30.0 },
    BandDef { name: "gamma", f_min_hz: 30.0, f_max_hz: 45.0 },
];

/// Per-channel Welch PSD on a uniform frequency grid spanning `[0, fs/2]`.
#[derive(Debug, Clone)]
pub struct PsdEstimate {
    pub freqs_hz: Vec<f64>,
    /// C × |freqs|, in µV²/Hz.
    pub psd: Array2<f64>,
    pub segment_len: usize,
    pub overlap_fraction: f64,
    pub sample_rate_hz: f64,
}

impl PsdEstimate {
    pub fn resolution_hz(&self) -> f64 {
        self.sample_rate_hz / self.segment_len as f64
    }
}

/// Absolute and relative band powers, one row per channel, bands in
/// canonical order.
#[derive(Debug, Clone)]
pub struct BandPowerSet {
    pub absolute: Array2<f64>,
    pub relative: Array2<f64>,
}

/// Channel-averaged spectral summary statistics over 0.5–45 Hz.
#[derive(Debug, Clone, Copy)]
pub struct SpectralSummaries {
    pub mean_freq_hz: f64,
    pub median_freq_hz: f64,
    pub spectral_entropy_nats: f64,
}

#[derive(Debug)]
pub enum SpectralError {
    SegmentTooLong { segment_len: usize, epoch_len: usize },
    NoCompleteSegment,
    /// Segment length must be even so the grid ends exactly at Nyquist.
    OddSegmentLength(usize),
    /// Grid spacing too coarse to resolve the narrowest band.
    ResolutionTooCoarse { resolution_hz: f64, required_hz: f64 },
    GridDoesNotCoverBand { grid_max_hz: f64, band_max_hz: f64 },
}

impl fmt::Display for SpectralError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SegmentTooLong { segment_len, epoch_len } => {
                write!(f, "segment length {segment_len} exceeds epoch length {epoch_len}")
            }
            Self::NoCompleteSegment => write!(f, "no complete Welch segment fits the epoch"),
            Self::OddSegmentLength(n) => write!(f, "segment length {n} must be even"),
            Self::ResolutionTooCoarse { resolution_hz, required_hz } => {
                write!(f, "grid resolution {resolution_hz} Hz coarser than {required_hz} Hz")
            }
            Self::GridDoesNotCoverBand { grid_max_hz, band_max_hz } => {
                write!(f, "grid tops out at {grid_max_hz} Hz, below the band edge {band_max_hz} Hz")
            }
        }
    }
}

impl std::error::Error for SpectralError {}

/// Largest power of two ≤ `n`, the fallback segment length for short epochs.
pub fn fallback_segment_len(n: usize) -> usize {
    debug_assert!(n >= 2);
    1 << (usize::BITS - 1 - n.leading_zeros())
}

/// Welch PSD: Hann-windowed, mean-detrended segments with the given overlap,
/// periodogram scaling `1/(fs·Σw²)`, one-sided with doubled interior bins.
pub fn welch_psd(
    epoch: &Epoch,
    segment_len: usize,
    overlap_fraction: f64,
) -> Result<PsdEstimate, SpectralError> {
    let t_e = epoch.data.ncols();
    if segment_len > t_e {
        return Err(SpectralError::SegmentTooLong { segment_len, epoch_len: t_e });
    }
    if segment_len % 2 != 0 || segment_len == 0 {
        return Err(SpectralError::OddSegmentLength(segment_len));
    }
    assert!((0.0..1.0).contains(&overlap_fraction), "overlap must be in [0,1)");

    let fs = epoch.sample_rate_hz;
    let hop = segment_len - ((segment_len as f64) * overlap_fraction).floor() as usize;
    let hop = hop.max(1);
    let n_segments = if t_e >= segment_len { (t_e - segment_len) / hop + 1 } else { 0 };
    if n_segments == 0 {
        return Err(SpectralError::NoCompleteSegment);
    }

    // Symmetric Hann window w[n] = 0.5(1 - cos(2πn/(N-1))).
    let window: Vec<f64> = (0..segment_len)
        .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / (segment_len as f64 - 1.0)).cos()))
        .collect();
    let win_power: f64 = window.iter().map(|w| w * w).sum();
    let scale = 1.0 / (fs * win_power);

    let n_bins = segment_len / 2 + 1;
    let freqs_hz: Vec<f64> = (0..n_bins).map(|k| k as f64 * fs / segment_len as f64).collect();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(segment_len);

    let c = epoch.data.nrows();
    let mut psd = Array2::<f64>::zeros((c, n_bins));
    let mut buffer = vec![Complex64::new(0.0, 0.0); segment_len];
    for ch in 0..c {
        let row = epoch.data.row(ch);
        let mut acc = vec![0.0f64; n_bins];
        for seg in 0..n_segments {
            let start = seg * hop;
            let slice = row.slice(ndarray::s![start..start + segment_len]);
            let mean = slice.sum() / segment_len as f64;
            for (i, (&v, w)) in slice.iter().zip(&window).enumerate() {
                buffer[i] = Complex64::new((v - mean) * w, 0.0);
            }
            fft.process(&mut buffer);
            for (k, a) in acc.iter_mut().enumerate() {
                let mut p = buffer[k].norm_sqr() * scale;
                if k != 0 && k != n_bins - 1 {
                    p *= 2.0;
                }
                *a += p;
            }
        }
        for (k, a) in acc.iter().enumerate() {
            psd[[ch, k]] = a / n_segments as f64;
        }
    }

    Ok(PsdEstimate {
        freqs_hz,
        psd,
        segment_len,
        overlap_fraction,
        sample_rate_hz: fs,
    })
}

/// Integral of the piecewise-linear interpolant of `(freqs, values)` over
/// `[a, b]`, with partial-bin interpolation at both edges. `[a, b]` is
/// clipped to the grid range.
fn trapezoid_integral(freqs: &[f64], values: ndarray::ArrayView1<f64>, a: f64, b: f64) -> f64 {
    let lo = a.max(freqs[0]);
    let hi = b.min(*freqs.last().unwrap());
    if lo >= hi {
        return 0.0;
    }
    let interp = |f: f64| -> (usize, f64) {
        // Bin index i with freqs[i] <= f, and linearly interpolated value.
        let df = freqs[1] - freqs[0];
        let idx = (((f - freqs[0]) / df).floor() as usize).min(freqs.len() - 2);
        let w = (f - freqs[idx]) / df;
        (idx, values[idx] * (1.0 - w) + values[idx + 1] * w)
    };
    let (i_lo, v_lo) = interp(lo);
    let (i_hi, v_hi) = interp(hi);
    if i_lo == i_hi {
        return 0.5 * (v_lo + v_hi) * (hi - lo);
    }
    let mut total = 0.5 * (v_lo + values[i_lo + 1]) * (freqs[i_lo + 1] - lo);
    for i in i_lo + 1..i_hi {
        total += 0.5 * (values[i] + values[i + 1]) * (freqs[i + 1] - freqs[i]);
    }
    total += 0.5 * (values[i_hi] + v_hi) * (hi - freqs[i_hi]);
    total
}

/// Absolute band powers by trapezoidal integration of the PSD, and relative
/// powers normalized by the five-band total (ε-guarded).
pub fn band_powers(psd: &PsdEstimate, bands: &[BandDef]) -> Result<BandPowerSet, SpectralError> {
    let resolution = psd.resolution_hz();
    let narrowest = bands
        .iter()
        .map(|b| b.f_max_hz - b.f_min_hz)
        .fold(f64::INFINITY, f64::min);
    if resolution > 0.5 + 1e-12 {
        return Err(SpectralError::ResolutionTooCoarse {
            resolution_hz: resolution,
            required_hz: narrowest.min(0.5),
        });
    }

    let c = psd.psd.nrows();
    let mut absolute = Array2::<f64>::zeros((c, bands.len()));
    for ch in 0..c {
        for (bi, band) in bands.iter().enumerate() {
            absolute[[ch, bi]] =
                trapezoid_integral(&psd.freqs_hz, psd.psd.row(ch), band.f_min_hz, band.f_max_hz);
        }
    }
    let mut relative = absolute.clone();
    for mut row in relative.rows_mut() {
        let total: f64 = row.sum();
        row.mapv_inplace(|v| v / (total + POWER_EPSILON));
    }
    Ok(BandPowerSet { absolute, relative })
}

/// Channel-averaged mean frequency, median frequency and spectral entropy of
/// the PSD restricted to 0.5–45 Hz.
///
/// Each grid bin is treated as unit mass spread over its cell of width `df`;
/// the median is the point where cumulative mass crosses one half, linearly
/// interpolated inside the crossing cell.
pub fn spectral_summaries(psd: &PsdEstimate) -> Result<SpectralSummaries, SpectralError> {
    let (lo, hi) = SUMMARY_RANGE_HZ;
    let grid_max = *psd.freqs_hz.last().unwrap();
    if grid_max < hi {
        return Err(SpectralError::GridDoesNotCoverBand { grid_max_hz: grid_max, band_max_hz: hi });
    }
    let in_range: Vec<usize> = (0..psd.freqs_hz.len())
        .filter(|&i| psd.freqs_hz[i] >= lo - 1e-12 && psd.freqs_hz[i] <= hi + 1e-12)
        .collect();
    if in_range.len() < 2 {
        return Err(SpectralError::ResolutionTooCoarse {
            resolution_hz: psd.resolution_hz(),
            required_hz: hi - lo,
        });
    }
    let freqs: Vec<f64> = in_range.iter().map(|&i| psd.freqs_hz[i]).collect();
    let df = freqs[1] - freqs[0];

    let c = psd.psd.nrows();
    let (mut mean_acc, mut median_acc, mut entropy_acc) = (0.0, 0.0, 0.0);
    for ch in 0..c {
        let raw: Vec<f64> = in_range.iter().map(|&i| psd.psd[[ch, i]]).collect();
        let total: f64 = raw.iter().sum();
        let mass: Vec<f64> = raw.iter().map(|v| v / (total + POWER_EPSILON)).collect();

        let mean: f64 = freqs.iter().zip(&mass).map(|(f, m)| f * m).sum();

        let mut median = *freqs.last().unwrap();
        let mut cum = 0.0;
        for (i, &m) in mass.iter().enumerate() {
            let next = cum + m;
            if next >= 0.5 {
                median = if m > 0.0 {
                    (freqs[i] - df / 2.0) + (0.5 - cum) / m * df
                } else {
                    freqs[i]
                };
                break;
            }
            cum = next;
        }

        let entropy: f64 = mass
            .iter()
            .filter(|&&m| m > 0.0)
            .map(|&m| -m * m.ln())
            .sum();

        mean_acc += mean;
        median_acc += median;
        entropy_acc += entropy;
    }
    Ok(SpectralSummaries {
        mean_freq_hz: mean_acc / c as f64,
        median_freq_hz: median_acc / c as f64,
        spectral_entropy_nats: entropy_acc / c as f64,
    })
}

/// Channel mean of the relative band powers, canonical band order.
pub fn aggregate_fft_features(bp: &BandPowerSet) -> [f64; 5] {
    let c = bp.relative.nrows() as f64;
    let mut out = [0.0; 5];
    for row in bp.relative.rows() {
        for (i, v) in row.iter().enumerate() {
            out[i] += v / c;
        }
    }
    out
}
