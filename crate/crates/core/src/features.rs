//! Session feature vectors and subject-disjoint dataset splits.
//!
//! Each session is summarized by 13 numbers in a fixed, documented order:
//! relative Welch band powers (δ, θ, α, β, γ), relative wavelet band
//! energies (δ, θ, α, β, γ), then mean frequency, median frequency and
//! spectral entropy. Per-epoch features are averaged uniformly across the
//! session's epochs.

use crate::preprocess::Epoch;
use crate::rng::Xoshiro256;
use crate::spectral::{self, CANONICAL_BANDS};
use crate::wavelet::{self, WaveletSpec};
use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

pub const FEATURE_DIM: usize = 13;

/// CSV header for feature files, fixed order.
pub const FEATURE_HEADER: &str = "subject_id,label,fft_delta,fft_theta,fft_alpha,fft_beta,\
fft_gamma,dwt_delta,dwt_theta,dwt_alpha,dwt_beta,dwt_gamma,mean_freq,median_freq,spectral_entropy";

#[derive(Debug, Clone, PartialEq)]
pub struct SessionFeatures {
    pub subject_id: String,
    pub label: usize,
    pub fft_bands: [f64; 5],
    pub dwt_bands: [f64; 5],
    pub mean_freq_hz: f64,
    pub median_freq_hz: f64,
    pub spectral_entropy_nats: f64,
}

impl SessionFeatures {
    pub fn to_vector(&self) -> [f64; FEATURE_DIM] {
        let mut v = [0.0; FEATURE_DIM];
        v[..5].copy_from_slice(&self.fft_bands);
        v[5..10].copy_from_slice(&self.dwt_bands);
        v[10] = self.mean_freq_hz;
        v[11] = self.median_freq_hz;
        v[12] = self.spectral_entropy_nats;
        v
    }
}

/// Welch settings used during feature extraction.
#[derive(Debug, Clone, Copy)]
pub struct WelchConfig {
    pub segment_len: usize,
    pub overlap_fraction: f64,
}

impl Default for WelchConfig {
    fn default() -> Self {
        Self { segment_len: 1024, overlap_fraction: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Val,
    Test,
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Train => write!(f, "train"),
            Self::Val => write!(f, "val"),
            Self::Test => write!(f, "test"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<SessionFeatures>,
    pub val: Vec<SessionFeatures>,
    pub test: Vec<SessionFeatures>,
    pub split_seed: u64,
    pub ratios: [f64; 3],
    /// subject → partition, for the audit file.
    pub assignment: BTreeMap<String, Partition>,
}

#[derive(Debug)]
pub enum FeatureError {
    EmptyEpochList,
    TooFewSubjects { class: usize, subjects: usize },
    ClassMissing { class: usize },
    BadRatios([f64; 3]),
    Spectral(spectral::SpectralError),
    Wavelet(wavelet::WaveletError),
    Io(std::io::Error),
    Parse(String),
}

impl fmt::Display for FeatureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyEpochList => write!(f, "no epochs supplied"),
            Self::TooFewSubjects { class, subjects } => {
                write!(f, "class {class} has {subjects} subjects, need at least 3")
            }
            Self::ClassMissing { class } => write!(f, "class {class} has no subjects"),
            Self::BadRatios(r) => write!(f, "ratios {r:?} must be positive and sum to 1"),
            Self::Spectral(e) => write!(f, "spectral: {e}"),
            Self::Wavelet(e) => write!(f, "wavelet: {e}"),
            Self::Io(e) => write!(f, "i/o error: {e}"),
            Self::Parse(msg) => write!(f, "parse error: {msg}"),
        }
    }
}

impl std::error::Error for FeatureError {}

impl From<spectral::SpectralError> for FeatureError {
    fn from(e: spectral::SpectralError) -> Self {
        Self::Spectral(e)
    }
}

impl From<wavelet::WaveletError> for FeatureError {
    fn from(e: wavelet::WaveletError) -> Self {
        Self::Wavelet(e)
    }
}

impl From<std::io::Error> for FeatureError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}

/// Computes the 13 features for each epoch and averages them uniformly.
/// All epochs must come from one session (same subject and label).
pub fn session_features(
    epochs: &[Epoch],
    welch: &WelchConfig,
    spec: &WaveletSpec,
) -> Result<SessionFeatures, FeatureError> {
    let first = epochs.first().ok_or(FeatureError::EmptyEpochList)?;
    let mut acc = [0.0f64; FEATURE_DIM];
    for ep in epochs {
        debug_assert_eq!(ep.subject_id, first.subject_id, "epochs from mixed sessions");
        let t_e = ep.data.ncols();
        let seg = if welch.segment_len <= t_e {
            welch.segment_len
        } else {
            spectral::fallback_segment_len(t_e)
        };
        let psd = spectral::welch_psd(ep, seg, welch.overlap_fraction)?;
        let bp = spectral::band_powers(&psd, &CANONICAL_BANDS)?;
        let fft = spectral::aggregate_fft_features(&bp);
        let summaries = spectral::spectral_summaries(&psd)?;
        let dwt = wavelet::session_dwt_features(ep, spec, &CANONICAL_BANDS)?;

        for i in 0..5 {
            acc[i] += fft[i];
            acc[5 + i] += dwt[i];
        }
        acc[10] += summaries.mean_freq_hz;
        acc[11] += summaries.median_freq_hz;
        acc[12] += summaries.spectral_entropy_nats;
    }
    let n = epochs.len() as f64;
    for v in &mut acc {
        *v /= n;
    }
    Ok(SessionFeatures {
        subject_id: first.subject_id.clone(),
        label: first.label,
        fft_bands: [acc[0], acc[1], acc[2], acc[3], acc[4]],
        dwt_bands: [acc[5], acc[6], acc[7], acc[8], acc[9]],
        mean_freq_hz: acc[10],
        median_freq_hz: acc[11],
        spectral_entropy_nats: acc[12],
    })
}

/// Splits sessions into train/val/test with whole subjects assigned to one
/// partition, stratified by label, deterministically under `seed`.
///
/// Within each class, subject counts follow largest-remainder apportionment
/// of the ratios, with at least one subject per partition.
pub fn split_by_subject(
    features: &[SessionFeatures],
    ratios: [f64; 3],
    seed: u64,
) -> Result<DatasetSplit, FeatureError> {
    let sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|&r| r <= 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(FeatureError::BadRatios(ratios));
    }

    // subject → label, insertion order independent (BTreeMap).
    let mut subject_label: BTreeMap<&str, usize> = BTreeMap::new();
    let mut n_classes = 0;
    for f in features {
        subject_label.insert(&f.subject_id, f.label);
        n_classes = n_classes.max(f.label + 1);
    }
    let mut by_class: Vec<Vec<&str>> = vec![Vec::new(); n_classes];
    for (&subj, &label) in &subject_label {
        by_class[label].push(subj);
    }
    for (class, subjects) in by_class.iter().enumerate() {
        if subjects.is_empty() {
            return Err(FeatureError::ClassMissing { class });
        }
        if subjects.len() < 3 {
            return Err(FeatureError::TooFewSubjects { class, subjects: subjects.len() });
        }
    }

    let mut rng = Xoshiro256::seed_from(seed);
    let mut assignment: BTreeMap<String, Partition> = BTreeMap::new();
    for subjects in &mut by_class {
        rng.shuffle(subjects);
        let counts = apportion(subjects.len(), ratios);
        let mut idx = 0;
        for (part, count) in
            [Partition::Train, Partition::Val, Partition::Test].into_iter().zip(counts)
        {
            for _ in 0..count {
                assignment.insert(subjects[idx].to_string(), part);
                idx += 1;
            }
        }
    }

    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for f in features {
        match assignment[&f.subject_id] {
            Partition::Train => train.push(f.clone()),
            Partition::Val => val.push(f.clone()),
            Partition::Test => test.push(f.clone()),
        }
    }
    Ok(DatasetSplit { train, val, test, split_seed: seed, ratios, assignment })
}

/// Largest-remainder apportionment of `n` into three parts, each ≥ 1.
fn apportion(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let raw: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|&x| x.floor() as usize).collect();
    let mut remainder = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if remainder == 0 {
            break;
        }
        counts[i] += 1;
        remainder -= 1;
    }
    // Guarantee every partition at least one subject (n >= 3 checked upstream).
    for i in 0..3 {
        while counts[i] == 0 {
            let donor = (0..3).max_by_key(|&j| counts[j]).unwrap();
            counts[donor] -= 1;
            counts[i] += 1;
        }
    }
    [counts[0], counts[1], counts[2]]
}

/// No subject may appear in more than one partition. Runs on every split
/// before anything downstream consumes it.
pub fn assert_subject_disjoint(split: &DatasetSplit) -> Result<(), String> {
    let mut seen: BTreeMap<&str, Partition> = BTreeMap::new();
    for (part, sessions) in [
        (Partition::Train, &split.train),
        (Partition::Val, &split.val),
        (Partition::Test, &split.test),
    ] {
        for s in sessions {
            if let Some(prev) = seen.insert(&s.subject_id, part) {
                if prev != part {
                    return Err(format!("subject {:?} appears in {prev} and {part}", s.subject_id));
                }
            }
        }
    }
    Ok(())
}

pub fn write_features_csv<P: AsRef<Path>>(path: P, rows: &[SessionFeatures]) -> Result<(), FeatureError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{FEATURE_HEADER}")?;
    for r in rows {
        let v = r.to_vector();
        let cells: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
        writeln!(out, "{},{},{}", r.subject_id, r.label, cells.join(","))?;
    }
    Ok(())
}

pub fn read_features_csv<P: AsRef<Path>>(path: P) -> Result<Vec<SessionFeatures>, FeatureError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| FeatureError::Parse("empty feature file".into()))?;
    if header.trim() != FEATURE_HEADER {
        return Err(FeatureError::Parse("unexpected feature CSV header".into()));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != FEATURE_DIM + 2 {
            return Err(FeatureError::Parse(format!("line {}: wrong column count", i + 2)));
        }
        let label: usize = cells[1]
            .parse()
            .map_err(|_| FeatureError::Parse(format!("line {}: bad label", i + 2)))?;
        let mut v = [0.0f64; FEATURE_DIM];
        for (j, cell) in cells[2..].iter().enumerate() {
            v[j] = cell
                .parse()
                .map_err(|_| FeatureError::Parse(format!("line {}: bad number", i + 2)))?;
        }
        rows.push(SessionFeatures {
            subject_id: cells[0].to_string(),
            label,
            fft_bands: [v[0], v[1], v[2], v[3], v[4]],
            dwt_bands: [v[5], v[6], v[7], v[8], v[9]],
            mean_freq_hz: v[10],
            median_freq_hz: v[11],
            spectral_entropy_nats: v[12],
        });
    }
    Ok(rows)
}

/// Writes `subject_id,partition` lines, sorted by subject.
pub fn write_split_file<P: AsRef<Path>>(path: P, split: &DatasetSplit) -> Result<(), FeatureError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "subject_id,partition")?;
    for (subj, part) in &split.assignment {
        writeln!(out, "{subj},{part}")?;
    }
    Ok(())
}

pub fn read_split_file<P: AsRef<Path>>(path: P) -> Result<BTreeMap<String, Partition>, FeatureError> {
    let text = std::fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let (subj, part) = line
            .split_once(',')
            .ok_or_else(|| FeatureError::Parse(format!("split file line {}", i + 1)))?;
        let part = match part.trim() {
            "train" => Partition::Train,
            "val" => Partition::Val,
            "test" => Partition::Test,
            other => return Err(FeatureError::Parse(format!("unknown partition {other:?}"))),
        };
        map.insert(subj.trim().to_string(), part);
    }
    if map.is_empty() {
        return Err(FeatureError::Parse("split file has no assignments".into()));
    }
    Ok(map)
}
