//! Model-agnostic attention diagnostics: KL divergence between the attention
//! maps of correct and incorrect predictions, plus the per-band signal
//! decomposition exported for external sequence models.
//!
//! Attention maps arrive as text files produced by whatever model code ran
//! the transformer; this crate never runs one. Format, one file per sample:
//!
//! ```text
//! sample_id <id>
//! outcome correct|incorrect
//! shape <Q> <K>
//! <Q lines of K space-separated floats>
//! ```

use crate::ingest::Recording;
use crate::preprocess::{self, PreprocessError};
use crate::spectral::CANONICAL_BANDS;
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

pub const KL_SMOOTHING_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Correct,
    Incorrect,
}

/// Query×key nonnegative weights for one test sample, head/layer averaging
/// already done by the exporter.
#[derive(Debug, Clone)]
pub struct AttentionMap {
    pub sample_id: String,
    pub outcome: Outcome,
    pub weights: Array2<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KlReport {
    pub kl_correct_vs_incorrect: f64,
    pub kl_incorrect_vs_correct: f64,
    pub pair_count: usize,
    /// Population standard deviation across the correct→incorrect pairs.
    pub std_correct_vs_incorrect: f64,
    pub n_correct: usize,
    pub n_incorrect: usize,
    pub smoothing_eps: f64,
    /// The exporter's averaging convention is outside this crate's control;
    /// recorded verbatim for the report's audit trail.
    pub normalization: String,
}

#[derive(Debug)]
pub enum AttentionError {
    /// Weights summed to zero before smoothing — an exporter bug.
    AllZeroMap { sample_id: String },
    NegativeWeight { sample_id: String },
    LengthMismatch { left: usize, right: usize },
    MissingOutcomeGroup { missing: &'static str },
    ShapeMismatch { expected: (usize, usize), got: (usize, usize), sample_id: String },
    Format { line: usize, message: String },
    Preprocess(PreprocessError),
    Io(std::io::Error),
}

impl fmt::Display for AttentionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::AllZeroMap { sample_id } => write!(f, "map {sample_id:?} is all zeros"),
            Self::NegativeWeight { sample_id } => {
                write!(f, "map {sample_id:?} has a negative weight")
            }
            Self::LengthMismatch { left, right } => {
                write!(f, "distributions of length {left} vs {right}")
            }
            Self::MissingOutcomeGroup { missing } => {
                write!(f, "no {missing} maps in the input set")
            }
            Self::ShapeMismatch { expected, got, sample_id } => write!(
                f,
                "map {sample_id:?} is {}x{}, expected {}x{}",
                got.0, got.1, expected.0, expected.1
            ),
            Self::Format { line, message } => write!(f, "line {line}: {message}"),
            Self::Preprocess(e) => write!(f, "preprocess: {e}"),
            Self::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for AttentionError {}

impl From<std::io::Error> for AttentionError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}

impl From<PreprocessError> for AttentionError {
    fn from(e: PreprocessError) -> Self {
        Self::Preprocess(e)
    }
}

/// Flattens row-major, adds the smoothing epsilon everywhere, normalizes to
/// sum 1. Rejects maps whose pre-smoothing sum is zero.
pub fn normalize_map(map: &AttentionMap, smoothing_eps: f64) -> Result<Vec<f64>, AttentionError> {
    if map.weights.iter().any(|&w| w < 0.0) {
        return Err(AttentionError::NegativeWeight { sample_id: map.sample_id.clone() });
    }
    let raw_sum: f64 = map.weights.iter().sum();
    if raw_sum == 0.0 {
        return Err(AttentionError::AllZeroMap { sample_id: map.sample_id.clone() });
    }
    let n = map.weights.len() as f64;
    let total = raw_sum + smoothing_eps * n;
    Ok(map.weights.iter().map(|&w| (w + smoothing_eps) / total).collect())
}

/// `Σ p_i ln(p_i / q_i)` in nats. Entries must be positive (smoothed).
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64, AttentionError> {
    if p.len() != q.len() {
        return Err(AttentionError::LengthMismatch { left: p.len(), right: q.len() });
    }
    Ok(p.iter().zip(q).map(|(&pi, &qi)| pi * (pi / qi).ln()).sum())
}

/// Average KL over all ordered (correct, incorrect) pairs in both directions,
/// with the population standard deviation of the correct→incorrect values.
pub fn pairwise_kl_report(maps: &[AttentionMap]) -> Result<KlReport, AttentionError> {
    let shape = match maps.first() {
        Some(m) => m.weights.dim(),
        None => return Err(AttentionError::MissingOutcomeGroup { missing: "correct" }),
    };
    for m in maps {
        if m.weights.dim() != shape {
            return Err(AttentionError::ShapeMismatch {
                expected: shape,
                got: m.weights.dim(),
                sample_id: m.sample_id.clone(),
            });
        }
    }
    let correct: Vec<Vec<f64>> = maps
        .iter()
        .filter(|m| m.outcome == Outcome::Correct)
        .map(|m| normalize_map(m, KL_SMOOTHING_EPS))
        .collect::<Result<_, _>>()?;
    let incorrect: Vec<Vec<f64>> = maps
        .iter()
        .filter(|m| m.outcome == Outcome::Incorrect)
        .map(|m| normalize_map(m, KL_SMOOTHING_EPS))
        .collect::<Result<_, _>>()?;
    if correct.is_empty() {
        return Err(AttentionError::MissingOutcomeGroup { missing: "correct" });
    }
    if incorrect.is_empty() {
        return Err(AttentionError::MissingOutcomeGroup { missing: "incorrect" });
    }

    let pairs: Vec<(usize, usize)> = (0..correct.len())
        .flat_map(|i| (0..incorrect.len()).map(move |j| (i, j)))
        .collect();
    let ci: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| kl_divergence(&correct[i], &incorrect[j]).expect("equal lengths"))
        .collect();
    let ic: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| kl_divergence(&incorrect[j], &correct[i]).expect("equal lengths"))
        .collect();

    let n = pairs.len() as f64;
    let mean_ci = ci.iter().sum::<f64>() / n;
    let mean_ic = ic.iter().sum::<f64>() / n;
    let var_ci = ci.iter().map(|v| (v - mean_ci).powi(2)).sum::<f64>() / n;
    Ok(KlReport {
        kl_correct_vs_incorrect: mean_ci,
        kl_incorrect_vs_correct: mean_ic,
        pair_count: pairs.len(),
        std_correct_vs_incorrect: var_ci.sqrt(),
        n_correct: correct.len(),
        n_incorrect: incorrect.len(),
        smoothing_eps: KL_SMOOTHING_EPS,
        normalization: "flatten row-major, add eps, divide by sum".into(),
    })
}

/// Parses one attention tensor file.
pub fn parse_attention_file<P: AsRef<Path>>(path: P) -> Result<AttentionMap, AttentionError> {
    let text = std::fs::read_to_string(path)?;
    parse_attention_text(&text)
}

pub fn parse_attention_text(text: &str) -> Result<AttentionMap, AttentionError> {
    let mut lines = text.lines().enumerate();
    let mut next_line = |expect: &str| -> Result<(usize, String), AttentionError> {
        lines
            .next()
            .map(|(i, l)| (i + 1, l.to_string()))
            .ok_or(AttentionError::Format { line: 0, message: format!("missing {expect} line") })
    };

    let (ln, header) = next_line("sample_id")?;
    let sample_id = header
        .strip_prefix("sample_id ")
        .ok_or(AttentionError::Format { line: ln, message: "expected `sample_id <id>`".into() })?
        .trim()
        .to_string();

    let (ln, outcome_line) = next_line("outcome")?;
    let outcome = match outcome_line.strip_prefix("outcome ").map(str::trim) {
        Some("correct") => Outcome::Correct,
        Some("incorrect") => Outcome::Incorrect,
        _ => {
            return Err(AttentionError::Format {
                line: ln,
                message: "expected `outcome correct|incorrect`".into(),
            })
        }
    };

    let (ln, shape_line) = next_line("shape")?;
    let dims: Vec<usize> = shape_line
        .strip_prefix("shape ")
        .map(|s| s.split_whitespace().filter_map(|t| t.parse().ok()).collect())
        .unwrap_or_default();
    let [q, k] = dims[..] else {
        return Err(AttentionError::Format { line: ln, message: "expected `shape Q K`".into() });
    };
    if q == 0 || k == 0 {
        return Err(AttentionError::Format { line: ln, message: "zero-sized shape".into() });
    }

    let mut weights = Array2::<f64>::zeros((q, k));
    for row in 0..q {
        let (ln, line) = next_line("weight row")?;
        let values: Result<Vec<f64>, _> =
            line.split_whitespace().map(str::parse::<f64>).collect();
        let values = values.map_err(|e| AttentionError::Format {
            line: ln,
            message: format!("bad float: {e}"),
        })?;
        if values.len() != k {
            return Err(AttentionError::Format {
                line: ln,
                message: format!("expected {k} values, got {}", values.len()),
            });
        }
        for (col, v) in values.into_iter().enumerate() {
            weights[[row, col]] = v;
        }
    }
    Ok(AttentionMap { sample_id, outcome, weights })
}

/// Reads every regular file in a directory as an attention map, in sorted
/// filename order.
pub fn load_attention_dir<P: AsRef<Path>>(dir: P) -> Result<Vec<AttentionMap>, AttentionError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    paths.iter().map(parse_attention_file).collect()
}

/// Splits a preprocessed recording into the five canonical bands with the
/// same zero-phase Butterworth machinery the preprocessing stage uses.
/// Expects input already at 256 Hz and broadband-filtered.
pub fn band_split(rec: &Recording) -> Result<Vec<(String, Recording)>, AttentionError> {
    CANONICAL_BANDS
        .iter()
        .map(|band| {
            let filtered = preprocess::bandpass(rec, band.f_min_hz, band.f_max_hz)?;
            Ok((band.name.to_string(), filtered))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    fn map(id: &str, outcome: Outcome, w: Array2<f64>) -> AttentionMap {
        AttentionMap { sample_id: id.into(), outcome, weights: w }
    }

    #[test]
    fn normalize_uniform_map() {
        let m = map("a", Outcome::Correct, arr2(&[[1.0, 1.0], [1.0, 1.0]]));
        let p = normalize_map(&m, 0.0).unwrap();
        assert_eq!(p, vec![0.25; 4]);
    }

    #[test]
    fn normalize_without_smoothing_keeps_zeros() {
        let m = map("a", Outcome::Correct, arr2(&[[1.0, 0.0], [0.0, 0.0]]));
        let p = normalize_map(&m, 0.0).unwrap();
        assert_eq!(p, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn normalized_maps_sum_to_one() {
        let mut rng = crate::rng::Xoshiro256::seed_from(2);
        for _ in 0..50 {
            let w = Array2::from_shape_fn((3, 4), |_| rng.next_f64());
            let m = map("r", Outcome::Correct, w);
            let p = normalize_map(&m, KL_SMOOTHING_EPS).unwrap();
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn all_zero_map_is_rejected() {
        let m = map("z", Outcome::Correct, Array2::zeros((2, 2)));
        assert!(matches!(
            normalize_map(&m, KL_SMOOTHING_EPS),
            Err(AttentionError::AllZeroMap { .. })
        ));
    }

    #[test]
    fn kl_identity_and_hand_computed_pair() {
        let p = vec![0.5, 0.5];
        assert!(kl_divergence(&p, &p).unwrap().abs() < 1e-15);

        let q = vec![0.9, 0.1];
        let expect_pq = 0.5 * (0.5f64 / 0.9).ln() + 0.5 * (0.5f64 / 0.1).ln();
        let expect_qp = 0.9 * (0.9f64 / 0.5).ln() + 0.1 * (0.1f64 / 0.5).ln();
        let kl_pq = kl_divergence(&p, &q).unwrap();
        let kl_qp = kl_divergence(&q, &p).unwrap();
        assert!((kl_pq - expect_pq).abs() < 1e-12);
        assert!((kl_qp - expect_qp).abs() < 1e-12);
        // frozen values, 5 decimals
        assert!((kl_pq - 0.51083).abs() < 5e-6, "{kl_pq}");
        assert!((kl_qp - 0.36806).abs() < 5e-6, "{kl_qp}");
        assert!(kl_pq != kl_qp);
    }

    #[test]
    fn kl_nonnegative_on_random_smoothed_pairs() {
        let mut rng = crate::rng::Xoshiro256::seed_from(4);
        for _ in 0..100 {
            let a = map("a", Outcome::Correct, Array2::from_shape_fn((2, 3), |_| rng.next_f64()));
            let b = map("b", Outcome::Incorrect, Array2::from_shape_fn((2, 3), |_| rng.next_f64()));
            let p = normalize_map(&a, KL_SMOOTHING_EPS).unwrap();
            let q = normalize_map(&b, KL_SMOOTHING_EPS).unwrap();
            assert!(kl_divergence(&p, &q).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn identical_maps_give_zero_averages() {
        let w = arr2(&[[0.2, 0.8], [0.5, 0.5]]);
        let maps = vec![
            map("c1", Outcome::Correct, w.clone()),
            map("i1", Outcome::Incorrect, w.clone()),
            map("i2", Outcome::Incorrect, w),
        ];
        let report = pairwise_kl_report(&maps).unwrap();
        assert!(report.kl_correct_vs_incorrect.abs() < 1e-12);
        assert!(report.kl_incorrect_vs_correct.abs() < 1e-12);
        assert_eq!(report.pair_count, 2);
    }

    #[test]
    fn single_pair_report_equals_single_kl() {
        let a = arr2(&[[0.5, 0.5]]);
        let b = arr2(&[[0.9, 0.1]]);
        let maps =
            vec![map("c", Outcome::Correct, a), map("i", Outcome::Incorrect, b)];
        let report = pairwise_kl_report(&maps).unwrap();
        assert!((report.kl_correct_vs_incorrect - 0.51083).abs() < 5e-5);
        assert!((report.kl_incorrect_vs_correct - 0.36806).abs() < 5e-5);
        assert_eq!(report.pair_count, 1);
        assert_eq!(report.std_correct_vs_incorrect, 0.0);
    }

    #[test]
    fn two_by_two_report_matches_hand_enumeration() {
        let mut rng = crate::rng::Xoshiro256::seed_from(9);
        let mk = |rng: &mut crate::rng::Xoshiro256| {
            Array2::from_shape_fn((2, 2), |_| rng.next_f64() + 0.1)
        };
        let c1 = mk(&mut rng);
        let c2 = mk(&mut rng);
        let i1 = mk(&mut rng);
        let i2 = mk(&mut rng);
        let maps = vec![
            map("c1", Outcome::Correct, c1.clone()),
            map("c2", Outcome::Correct, c2.clone()),
            map("i1", Outcome::Incorrect, i1.clone()),
            map("i2", Outcome::Incorrect, i2.clone()),
        ];
        let report = pairwise_kl_report(&maps).unwrap();
        assert_eq!(report.pair_count, 4);

        let norm = |w: &Array2<f64>| {
            normalize_map(&map("t", Outcome::Correct, w.clone()), KL_SMOOTHING_EPS).unwrap()
        };
        let (nc1, nc2, ni1, ni2) = (norm(&c1), norm(&c2), norm(&i1), norm(&i2));
        let mut sum = 0.0;
        for c in [&nc1, &nc2] {
            for i in [&ni1, &ni2] {
                sum += kl_divergence(c, i).unwrap();
            }
        }
        assert!((report.kl_correct_vs_incorrect - sum / 4.0).abs() < 1e-12);
    }

    #[test]
    fn report_is_order_invariant() {
        let mut rng = crate::rng::Xoshiro256::seed_from(11);
        let mut maps: Vec<AttentionMap> = (0..6)
            .map(|i| {
                let outcome = if i % 2 == 0 { Outcome::Correct } else { Outcome::Incorrect };
                map(&format!("m{i}"), outcome, Array2::from_shape_fn((2, 2), |_| rng.next_f64()))
            })
            .collect();
        let r1 = pairwise_kl_report(&maps).unwrap();
        maps.reverse();
        let r2 = pairwise_kl_report(&maps).unwrap();
        assert!((r1.kl_correct_vs_incorrect - r2.kl_correct_vs_incorrect).abs() < 1e-12);
        assert!((r1.kl_incorrect_vs_correct - r2.kl_incorrect_vs_correct).abs() < 1e-12);
    }

    #[test]
    fn missing_outcome_group_is_an_error() {
        let maps = vec![map("c", Outcome::Correct, arr2(&[[1.0]]))];
        assert!(matches!(
            pairwise_kl_report(&maps),
            Err(AttentionError::MissingOutcomeGroup { missing: "incorrect" })
        ));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let maps = vec![
            map("c", Outcome::Correct, arr2(&[[1.0, 0.0]])),
            map("i", Outcome::Incorrect, arr2(&[[1.0], [0.5]])),
        ];
        assert!(matches!(pairwise_kl_report(&maps), Err(AttentionError::ShapeMismatch { .. })));
    }

    #[test]
    fn tensor_file_round_trip() {
        let text = "sample_id s42\noutcome incorrect\nshape 2 3\n0.1 0.2 0.3\n0.4 0.5 0.6\n";
        let m = parse_attention_text(text).unwrap();
        assert_eq!(m.sample_id, "s42");
        assert_eq!(m.outcome, Outcome::Incorrect);
        assert_eq!(m.weights, arr2(&[[0.1, 0.2, 0.3], [0.4, 0.5, 0.6]]));
    }

    #[test]
    fn malformed_tensor_files_are_rejected() {
        assert!(parse_attention_text("bogus\n").is_err());
        assert!(parse_attention_text("sample_id a\noutcome maybe\nshape 1 1\n0.5\n").is_err());
        assert!(parse_attention_text("sample_id a\noutcome correct\nshape 1 2\n0.5\n").is_err());
        assert!(
            parse_attention_text("sample_id a\noutcome correct\nshape 1 1\nnotanumber\n").is_err()
        );
    }

    fn tone_recording(freq: f64, fs: f64, n: usize) -> Recording {
        Recording {
            subject_id: "s".into(),
            session_id: "t".into(),
            label: 0,
            channels: vec!["ch0".into()],
            sample_rate_hz: fs,
            data: Array2::from_shape_fn((1, n), |(_, i)| {
                (2.0 * std::f64::consts::PI * freq * i as f64 / fs).sin()
            }),
        }
    }

    fn rms(rec: &Recording) -> f64 {
        (rec.data.iter().map(|v| v * v).sum::<f64>() / rec.data.len() as f64).sqrt()
    }

    #[test]
    fn tone_routes_to_its_band() {
        let rec = tone_recording(10.0, 256.0, 2048);
        let bands = band_split(&rec).unwrap();
        assert_eq!(bands.len(), 5);
        let rmses: Vec<f64> = bands.iter().map(|(_, r)| rms(r)).collect();
        let alpha = rmses[2];
        for (i, r) in rmses.iter().enumerate() {
            if i != 2 {
                assert!(alpha >= 10.0 * r, "band {i}: alpha {alpha} vs {r}");
            }
        }
    }

    #[test]
    fn zero_input_gives_five_zero_outputs() {
        let mut rec = tone_recording(10.0, 256.0, 512);
        rec.data.fill(0.0);
        for (_, band) in band_split(&rec).unwrap() {
            assert!(band.data.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn band_sum_correlates_with_broadband_input() {
        let mut rng = crate::rng::Xoshiro256::seed_from(3);
        let mut rec = tone_recording(10.0, 256.0, 2048);
        rec.data = Array2::from_shape_fn((1, 2048), |_| rng.next_gaussian());
        // pre-filter to the analysis band, as the pipeline would
        let rec = preprocess::bandpass(&rec, 0.5, 45.0).unwrap();
        let bands = band_split(&rec).unwrap();
        let mut summed = vec![0.0; 2048];
        for (_, band) in &bands {
            for (i, v) in band.data.row(0).iter().enumerate() {
                summed[i] += v;
            }
        }
        let x: Vec<f64> = rec.data.row(0).to_vec();
        let (mut dot, mut nx, mut ns) = (0.0, 0.0, 0.0);
        for i in 0..x.len() {
            dot += x[i] * summed[i];
            nx += x[i] * x[i];
            ns += summed[i] * summed[i];
        }
        let corr = dot / (nx * ns).sqrt();
        assert!(corr >= 0.95, "reconstruction correlation {corr}");
    }

    #[test]
    fn band_filtering_is_idempotent_within_tolerance() {
        let mut rng = crate::rng::Xoshiro256::seed_from(5);
        let mut rec = tone_recording(10.0, 256.0, 2048);
        rec.data = Array2::from_shape_fn((1, 2048), |_| rng.next_gaussian());
        let once = preprocess::bandpass(&rec, 8.0, 13.0).unwrap();
        let twice = preprocess::bandpass(&once, 8.0, 13.0).unwrap();
        let change = (rms(&twice) / rms(&once) - 1.0).abs();
        assert!(change <= 0.05, "rms change {change}");
    }
}
