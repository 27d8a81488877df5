//! Multilevel DWT band energies: db4 cascade filter bank under periodized
//! boundary handling, level energies by squared ℓ2 norms, and a deterministic
//! fractional-overlap mapping from dyadic subbands onto the canonical EEG
//! bands.
//!
//! Periodization keeps the transform exactly orthonormal whenever the input
//! length is even at every level, which makes total coefficient count equal
//! the signal length and makes Parseval hold to rounding error — both are
//! load-bearing for the test suite. Decomposition depth is therefore clipped
//! to the 2-adic valuation of the epoch length (a no-op for the power-of-two
//! epochs the pipeline produces).

use crate::preprocess::Epoch;
use crate::spectral::{BandDef, POWER_EPSILON};
use ndarray::Array2;
use std::fmt;

/// db4 decomposition lowpass filter (8 taps). The highpass is its quadrature
/// mirror, derived in [`WaveletSpec::db4`]. Orthonormality (Σh = √2, Σh² = 1,
/// even-shift orthogonality) is asserted by the test suite rather than
/// trusted.
pub const DB4_DEC_LO: [f64; 8] = [
    -0.010597401784997278,
    0.032883011666982945,
    0.030841381835986965,
    -0.18703481171888114,
    -0.02798376941698385,
    0.6308807679295904,
    0.7148465705525415,
    0.23037781330885523,
];

/// Decomposition filter pair plus the depth cap.
#[derive(Debug, Clone)]
pub struct WaveletSpec {
    pub family: String,
    pub decomposition_lowpass: Vec<f64>,
    pub decomposition_highpass: Vec<f64>,
    pub max_level_cap: usize,
}

impl WaveletSpec {
    pub fn db4() -> Self {
        let lo = DB4_DEC_LO.to_vec();
        let hi = quadrature_mirror(&lo);
        Self {
            family: "db4".into(),
            decomposition_lowpass: lo,
            decomposition_highpass: hi,
            max_level_cap: 8,
        }
    }

    pub fn filter_len(&self) -> usize {
        self.decomposition_lowpass.len()
    }
}

impl Default for WaveletSpec {
    fn default() -> Self {
        Self::db4()
    }
}

/// Alternating-flip highpass from an orthonormal lowpass:
/// `g[k] = (-1)^k h[L-1-k]`.
pub fn quadrature_mirror(lowpass: &[f64]) -> Vec<f64> {
    let l = lowpass.len();
    (0..l)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * lowpass[l - 1 - k]
        })
        .collect()
}

/// Coefficients of one channel's decomposition. `details[j-1]` holds level j
/// (level 1 is the finest / highest-frequency band).
#[derive(Debug, Clone)]
pub struct ChannelDecomposition {
    pub approx: Vec<f64>,
    pub details: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct WaveletDecomposition {
    pub levels: usize,
    pub channels: Vec<ChannelDecomposition>,
    pub sample_rate_hz: f64,
}

/// Level energies and their projection onto the canonical bands.
#[derive(Debug, Clone)]
pub struct WaveletEnergySet {
    /// `E^A` per channel.
    pub approx_energy: Vec<f64>,
    /// C×L, level j in column j−1.
    pub detail_energies: Array2<f64>,
    /// C×5 per-channel normalized band energies (empty until mapped).
    pub band_energies_relative: Array2<f64>,
    /// Channel-averaged relative band energies, canonical order.
    pub session_dwt: [f64; 5],
    pub levels: usize,
    pub sample_rate_hz: f64,
}

#[derive(Debug)]
pub enum WaveletError {
    SignalShorterThanFilter { signal_len: usize, filter_len: usize },
    LevelOutOfRange { level: usize, max: usize },
    EmptyIntervals,
}

impl fmt::Display for WaveletError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SignalShorterThanFilter { signal_len, filter_len } => {
                write!(f, "signal of {signal_len} samples shorter than filter ({filter_len})")
            }
            Self::LevelOutOfRange { level, max } => {
                write!(f, "subband level {level} outside 0..={max}")
            }
            Self::EmptyIntervals => write!(f, "no subband intervals supplied"),
        }
    }
}

impl std::error::Error for WaveletError {}

/// Largest admissible decomposition depth:
/// `min(cap, floor(log2(signal_len / (filter_len - 1))))`.
pub fn max_level(signal_len: usize, filter_len: usize, cap: usize) -> Result<usize, WaveletError> {
    if filter_len < 2 || signal_len < filter_len {
        return Err(WaveletError::SignalShorterThanFilter { signal_len, filter_len });
    }
    let q = signal_len / (filter_len - 1);
    if q == 0 {
        return Ok(0);
    }
    let floor_log2 = (usize::BITS - 1 - q.leading_zeros()) as usize;
    Ok(floor_log2.min(cap))
}

/// One analysis step under periodization: circular correlation with the
/// filter, then dyadic downsampling. `n` must be even.
fn dwt_step(x: &[f64], filter: &[f64]) -> Vec<f64> {
    let n = x.len();
    debug_assert!(n % 2 == 0);
    let mut out = Vec::with_capacity(n / 2);
    for m in 0..n / 2 {
        let mut acc = 0.0;
        for (k, &f) in filter.iter().enumerate() {
            acc += f * x[(2 * m + k) % n];
        }
        out.push(acc);
    }
    out
}

/// Number of trailing zero bits, i.e. how many times halving stays even.
fn dyadic_valuation(mut n: usize) -> usize {
    let mut v = 0;
    while n > 0 && n % 2 == 0 {
        n /= 2;
        v += 1;
    }
    v
}

/// Multilevel DWT of every channel. Depth is `max_level` clipped to the
/// 2-adic valuation of the epoch length so periodization stays orthonormal.
pub fn dwt(epoch: &Epoch, spec: &WaveletSpec) -> Result<WaveletDecomposition, WaveletError> {
    let t_e = epoch.data.ncols();
    let flen = spec.filter_len();
    if t_e < flen {
        return Err(WaveletError::SignalShorterThanFilter { signal_len: t_e, filter_len: flen });
    }
    let levels = max_level(t_e, flen, spec.max_level_cap)?.min(dyadic_valuation(t_e));

    let mut channels = Vec::with_capacity(epoch.data.nrows());
    for row in epoch.data.rows() {
        let mut approx: Vec<f64> = row.to_vec();
        let mut details = Vec::with_capacity(levels);
        for _ in 0..levels {
            let detail = dwt_step(&approx, &spec.decomposition_highpass);
            approx = dwt_step(&approx, &spec.decomposition_lowpass);
            details.push(detail);
        }
        channels.push(ChannelDecomposition { approx, details });
    }
    Ok(WaveletDecomposition { levels, channels, sample_rate_hz: epoch.sample_rate_hz })
}

/// Squared ℓ2 norms of every coefficient vector. Band fields stay zeroed
/// until [`map_to_bands`] fills them.
pub fn level_energies(dec: &WaveletDecomposition) -> WaveletEnergySet {
    let c = dec.channels.len();
    let mut approx_energy = Vec::with_capacity(c);
    let mut detail_energies = Array2::<f64>::zeros((c, dec.levels));
    for (ch, chan) in dec.channels.iter().enumerate() {
        approx_energy.push(chan.approx.iter().map(|v| v * v).sum());
        for (j, d) in chan.details.iter().enumerate() {
            detail_energies[[ch, j]] = d.iter().map(|v| v * v).sum();
        }
    }
    WaveletEnergySet {
        approx_energy,
        detail_energies,
        band_energies_relative: Array2::zeros((c, 5)),
        session_dwt: [0.0; 5],
        levels: dec.levels,
        sample_rate_hz: dec.sample_rate_hz,
    }
}

/// Nominal frequency support of a subband: level 0 encodes the
/// approximation `(0, fs/2^{L+1})`, detail level j covers
/// `(fs/2^{j+1}, fs/2^j)`.
pub fn dyadic_interval(level_j: usize, f_s: f64, levels: usize) -> Result<(f64, f64), WaveletError> {
    if level_j > levels {
        return Err(WaveletError::LevelOutOfRange { level: level_j, max: levels });
    }
    if level_j == 0 {
        Ok((0.0, f_s / 2f64.powi(levels as i32 + 1)))
    } else {
        Ok((f_s / 2f64.powi(level_j as i32 + 1), f_s / 2f64.powi(level_j as i32)))
    }
}

/// All subband intervals for a decomposition: index 0 is the approximation,
/// index j (1-based) the detail level j.
pub fn subband_intervals(f_s: f64, levels: usize) -> Vec<(f64, f64)> {
    (0..=levels).map(|j| dyadic_interval(j, f_s, levels).expect("j <= levels")).collect()
}

fn overlap_len(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.1.min(b.1) - a.0.max(b.0)).max(0.0)
}

/// Distributes each subband's energy over the bands in proportion to
/// interval overlap, normalizes per channel by the total assigned energy
/// (out-of-range energy is discarded first), and channel-averages into
/// the session feature `DWT_b`.
pub fn map_to_bands(
    mut energies: WaveletEnergySet,
    intervals: &[(f64, f64)],
    bands: &[BandDef],
) -> Result<WaveletEnergySet, WaveletError> {
    if intervals.is_empty() {
        return Err(WaveletError::EmptyIntervals);
    }
    assert_eq!(
        intervals.len(),
        energies.levels + 1,
        "need one interval per subband (approximation + each detail level)"
    );
    let c = energies.approx_energy.len();
    let mut band_abs = Array2::<f64>::zeros((c, bands.len()));
    for ch in 0..c {
        for (sub_idx, &interval) in intervals.iter().enumerate() {
            let width = interval.1 - interval.0;
            if width <= 0.0 {
                continue;
            }
            let energy = if sub_idx == 0 {
                energies.approx_energy[ch]
            } else {
                energies.detail_energies[[ch, sub_idx - 1]]
            };
            for (bi, band) in bands.iter().enumerate() {
                let frac = overlap_len(interval, (band.f_min_hz, band.f_max_hz)) / width;
                band_abs[[ch, bi]] += energy * frac;
            }
        }
    }

    let mut session = [0.0f64; 5];
    for ch in 0..c {
        let total: f64 = band_abs.row(ch).sum();
        for bi in 0..bands.len() {
            let rel = band_abs[[ch, bi]] / (total + POWER_EPSILON);
            energies.band_energies_relative[[ch, bi]] = rel;
            if bi < 5 {
                session[bi] += rel / c as f64;
            }
        }
    }
    energies.session_dwt = session;
    Ok(energies)
}

/// Full epoch → `DWT_b` convenience composition.
pub fn session_dwt_features(epoch: &Epoch, spec: &WaveletSpec, bands: &[BandDef]) -> Result<[f64; 5], WaveletError> {
    let dec = dwt(epoch, spec)?;
    let energies = level_energies(&dec);
    let intervals = subband_intervals(dec.sample_rate_hz, dec.levels);
    Ok(map_to_bands(energies, &intervals, bands)?.session_dwt)
}
