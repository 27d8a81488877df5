//! End-to-end orchestration behind the CLI subcommands: a single TOML config
//! drives extraction, training, grid search, evaluation, KL diagnostics and
//! band splitting. Every operation is deterministic given (config, inputs,
//! seed); nothing written here contains timestamps.

use crate::attention;
use crate::classify::{
    self, default_qda_grid, default_rf_grid, grid::design_matrix, ClassifyError, Hyper, QdaHyper,
    RfHyper, TrainedModel,
};
use crate::features::{
    self, FeatureError, Partition, SessionFeatures, WelchConfig,
};
use crate::ingest::{self, IngestError, Manifest, Recording};
use crate::metrics::{self, MetricsError, MetricsReport};
use crate::preprocess::{self, PreprocConfig, PreprocessError};
use crate::spectral;
use crate::wavelet::WaveletSpec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

/// Environment variable that overrides the configured seed (CI sweeps).
pub const SEED_ENV_VAR: &str = "NEUROBAND_SEED";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Label manifest; session paths inside resolve relative to its parent.
    pub manifest: PathBuf,
    pub output_dir: PathBuf,
    /// Master seed for splitting and classifier randomness.
    pub seed: u64,
    /// Which pipeline `train`/`gridsearch` build.
    pub classifier: ClassifierKind,
    pub refit_with_val: bool,
    /// Sampling rate assumed for CSV matrix inputs (EDF carries its own).
    pub csv_sample_rate_hz: f64,
    /// Also write per-session PSD CSVs during extraction.
    pub export_psd: bool,
    pub preproc: PreprocConfig,
    pub welch: WelchSettings,
    pub wavelet: WaveletSettings,
    pub split: SplitSettings,
    pub qda: QdaSettings,
    pub rf: RfSettings,
    pub grids: GridSettings,
    pub attention_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            manifest: PathBuf::from("manifest.txt"),
            output_dir: PathBuf::from("out"),
            seed: 42,
            classifier: ClassifierKind::Qda,
            refit_with_val: true,
            csv_sample_rate_hz: 256.0,
            export_psd: false,
            preproc: PreprocConfig::default(),
            welch: WelchSettings::default(),
            wavelet: WaveletSettings::default(),
            split: SplitSettings::default(),
            qda: QdaSettings::default(),
            rf: RfSettings::default(),
            grids: GridSettings::default(),
            attention_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Qda,
    Rf,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct WelchSettings {
    pub segment_len: usize,
    pub overlap_fraction: f64,
}

impl Default for WelchSettings {
    fn default() -> Self {
        Self { segment_len: 1024, overlap_fraction: 0.5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct WaveletSettings {
    pub family: String,
    pub max_level_cap: usize,
}

impl Default for WaveletSettings {
    fn default() -> Self {
        Self { family: "db4".into(), max_level_cap: 8 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSettings {
    pub ratios: [f64; 3],
}

impl Default for SplitSettings {
    fn default() -> Self {
        Self { ratios: [0.6, 0.2, 0.2] }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct QdaSettings {
    pub reg_lambda: f64,
    pub retained_variance: f64,
}

impl Default for QdaSettings {
    fn default() -> Self {
        Self { reg_lambda: 0.01, retained_variance: 0.99 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct RfSettings {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub retained_variance: f64,
}

impl Default for RfSettings {
    fn default() -> Self {
        Self { n_estimators: 300, max_depth: 0, min_samples_leaf: 1, retained_variance: 1.0 }
    }
}

/// Optional grid overrides; empty lists mean "use the built-in defaults".
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSettings {
    pub qda_lambdas: Vec<f64>,
    pub qda_variances: Vec<f64>,
    pub rf_n_estimators: Vec<usize>,
    pub rf_max_depths: Vec<usize>,
    pub rf_min_leafs: Vec<usize>,
}

#[derive(Debug)]
pub enum PipelineError {
    /// Bad config file or invalid settings (exit 1).
    Config(String),
    /// Filesystem problems (exit 2).
    Io { path: PathBuf, source: std::io::Error },
    /// Extraction produced zero feature rows (exit 3).
    AllSessionsFailed { attempted: usize },
    /// Model file failed schema validation (exit 4).
    ModelSchema(String),
    /// Split file assigns a subject to more than one partition (exit 5).
    SplitLeakage(String),
    /// Data-dependent failure in a pipeline stage (exit 1).
    Run(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Run(_) => 1,
            Self::Io { .. } => 2,
            Self::AllSessionsFailed { .. } => 3,
            Self::ModelSchema(_) => 4,
            Self::SplitLeakage(_) => 5,
        }
    }
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(msg) => write!(f, "config error: {msg}"),
            Self::Io { path, source } => write!(f, "i/o error on {}: {source}", path.display()),
            Self::AllSessionsFailed { attempted } => {
                write!(f, "all {attempted} sessions failed feature extraction")
            }
            Self::ModelSchema(msg) => write!(f, "model schema mismatch: {msg}"),
            Self::SplitLeakage(msg) => write!(f, "split leakage: {msg}"),
            Self::Run(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for PipelineError {}

impl From<ClassifyError> for PipelineError {
    fn from(e: ClassifyError) -> Self {
        match e {
            ClassifyError::ModelSchema(msg) => Self::ModelSchema(msg),
            other => Self::Run(other.to_string()),
        }
    }
}

impl From<FeatureError> for PipelineError {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::Io(io) => Self::Io { path: PathBuf::new(), source: io },
            other => Self::Run(other.to_string()),
        }
    }
}

impl From<MetricsError> for PipelineError {
    fn from(e: MetricsError) -> Self {
        Self::Run(e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

impl RunConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut config: Self =
            toml::from_str(&text).map_err(|e| PipelineError::Config(e.to_string()))?;
        // Relative paths in the config resolve against the config file.
        if let Some(base) = path.parent() {
            if config.manifest.is_relative() {
                config.manifest = base.join(&config.manifest);
            }
            if config.output_dir.is_relative() {
                config.output_dir = base.join(&config.output_dir);
            }
            if let Some(dir) = &config.attention_dir {
                if dir.is_relative() {
                    config.attention_dir = Some(base.join(dir));
                }
            }
        }
        config.apply_env_seed();
        Ok(config)
    }

    pub fn apply_env_seed(&mut self) {
        if let Ok(v) = std::env::var(SEED_ENV_VAR) {
            if let Ok(seed) = v.parse() {
                self.seed = seed;
            }
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.preproc.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        let rsum: f64 = self.split.ratios.iter().sum();
        if self.split.ratios.iter().any(|&r| r <= 0.0) || (rsum - 1.0).abs() > 1e-9 {
            return Err(PipelineError::Config(format!(
                "split ratios {:?} must be positive and sum to 1",
                self.split.ratios
            )));
        }
        if self.welch.segment_len == 0 || self.welch.segment_len % 2 != 0 {
            return Err(PipelineError::Config("welch segment_len must be even and nonzero".into()));
        }
        if !(0.0..1.0).contains(&self.welch.overlap_fraction) {
            return Err(PipelineError::Config("welch overlap must be in [0, 1)".into()));
        }
        if self.wavelet.family != "db4" {
            return Err(PipelineError::Config(format!(
                "unsupported wavelet family {:?} (db4 available)",
                self.wavelet.family
            )));
        }
        if self.wavelet.max_level_cap == 0 {
            return Err(PipelineError::Config("wavelet max_level_cap must be >= 1".into()));
        }
        if !(self.csv_sample_rate_hz > 0.0) {
            return Err(PipelineError::Config("csv_sample_rate_hz must be positive".into()));
        }
        Ok(())
    }

    fn wavelet_spec(&self) -> WaveletSpec {
        WaveletSpec { max_level_cap: self.wavelet.max_level_cap, ..WaveletSpec::db4() }
    }

    fn welch_config(&self) -> WelchConfig {
        WelchConfig {
            segment_len: self.welch.segment_len,
            overlap_fraction: self.welch.overlap_fraction,
        }
    }

    fn train_hyper(&self) -> Hyper {
        match self.classifier {
            ClassifierKind::Qda => Hyper::Qda(QdaHyper {
                reg_lambda: self.qda.reg_lambda,
                retained_variance: self.qda.retained_variance,
            }),
            ClassifierKind::Rf => Hyper::Rf(RfHyper {
                n_estimators: self.rf.n_estimators,
                max_depth: self.rf.max_depth,
                min_samples_leaf: self.rf.min_samples_leaf,
                retained_variance: self.rf.retained_variance,
            }),
        }
    }

    fn grid(&self) -> Vec<Hyper> {
        match self.classifier {
            ClassifierKind::Qda => {
                if self.grids.qda_lambdas.is_empty() && self.grids.qda_variances.is_empty() {
                    default_qda_grid()
                } else {
                    let lambdas = if self.grids.qda_lambdas.is_empty() {
                        vec![1e-4, 1e-3, 1e-2, 0.1, 0.5]
                    } else {
                        self.grids.qda_lambdas.clone()
                    };
                    let variances = if self.grids.qda_variances.is_empty() {
                        vec![0.90, 0.95, 0.99, 1.0]
                    } else {
                        self.grids.qda_variances.clone()
                    };
                    let mut grid = Vec::new();
                    for &reg_lambda in &lambdas {
                        for &retained_variance in &variances {
                            grid.push(Hyper::Qda(QdaHyper { reg_lambda, retained_variance }));
                        }
                    }
                    grid
                }
            }
            ClassifierKind::Rf => {
                if self.grids.rf_n_estimators.is_empty()
                    && self.grids.rf_max_depths.is_empty()
                    && self.grids.rf_min_leafs.is_empty()
                {
                    default_rf_grid(self.rf.retained_variance)
                } else {
                    let ns = if self.grids.rf_n_estimators.is_empty() {
                        vec![100, 300, 500]
                    } else {
                        self.grids.rf_n_estimators.clone()
                    };
                    let depths = if self.grids.rf_max_depths.is_empty() {
                        vec![0, 4, 8, 16]
                    } else {
                        self.grids.rf_max_depths.clone()
                    };
                    let leafs = if self.grids.rf_min_leafs.is_empty() {
                        vec![1, 2, 5]
                    } else {
                        self.grids.rf_min_leafs.clone()
                    };
                    let mut grid = Vec::new();
                    for &n in &ns {
                        for &d in &depths {
                            for &l in &leafs {
                                grid.push(Hyper::Rf(RfHyper {
                                    n_estimators: n,
                                    max_depth: d,
                                    min_samples_leaf: l,
                                    retained_variance: self.rf.retained_variance,
                                }));
                            }
                        }
                    }
                    grid
                }
            }
        }
    }

    pub fn features_path(&self) -> PathBuf {
        self.output_dir.join("features.csv")
    }

    pub fn model_path(&self) -> PathBuf {
        self.output_dir.join("model.json")
    }

    pub fn split_path(&self) -> PathBuf {
        self.output_dir.join("split.txt")
    }
}

/// Builds a rayon pool capped at `jobs` threads (or the default) and runs
/// `f` inside it.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match jobs {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(f),
        _ => f(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtractSummary {
    pub attempted: usize,
    pub extracted: usize,
    pub failures: Vec<SessionFailure>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionFailure {
    pub path: String,
    pub error: String,
}

fn load_manifest(config: &RunConfig) -> Result<Manifest, PipelineError> {
    ingest::load_manifest(&config.manifest).map_err(|e| match e {
        IngestError::Io(source) => PipelineError::Io { path: config.manifest.clone(), source },
        other => PipelineError::Config(format!("manifest: {other}")),
    })
}

fn resolve_session_path(config: &RunConfig, entry_path: &str) -> PathBuf {
    let p = Path::new(entry_path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        config.manifest.parent().unwrap_or(Path::new(".")).join(p)
    }
}

fn load_recording(
    config: &RunConfig,
    entry: &ingest::ManifestEntry,
) -> Result<Recording, IngestError> {
    let path = resolve_session_path(config, &entry.path);
    let mut rec = if path.extension().map(|e| e.eq_ignore_ascii_case("edf")).unwrap_or(false) {
        ingest::read_edf(&path)?
    } else {
        ingest::read_csv_matrix(&path, config.csv_sample_rate_hz)?
    };
    rec.subject_id = entry.subject_id.clone();
    rec.label = entry.label;
    Ok(rec)
}

fn preprocess_recording(
    config: &RunConfig,
    rec: &Recording,
) -> Result<Recording, PreprocessError> {
    let resampled = preprocess::resample(rec, config.preproc.target_rate_hz)?;
    let filtered = preprocess::bandpass(
        &resampled,
        config.preproc.band_low_hz,
        config.preproc.band_high_hz,
    )?;
    Ok(preprocess::center_dc(&filtered))
}

fn session_features_for_entry(
    config: &RunConfig,
    entry: &ingest::ManifestEntry,
) -> Result<(SessionFeatures, Option<(String, spectral::PsdEstimate)>), String> {
    let rec = load_recording(config, entry).map_err(|e| e.to_string())?;
    let prepped = preprocess_recording(config, &rec).map_err(|e| e.to_string())?;
    let epochs = preprocess::epoch(&prepped, &config.preproc).map_err(|e| e.to_string())?;
    let feats = features::session_features(&epochs, &config.welch_config(), &config.wavelet_spec())
        .map_err(|e| e.to_string())?;

    let psd = if config.export_psd {
        Some((rec.session_id.clone(), session_psd(config, &epochs).map_err(|e| e.to_string())?))
    } else {
        None
    };
    Ok((feats, psd))
}

/// Epoch-averaged Welch PSD for the inspection export.
fn session_psd(
    config: &RunConfig,
    epochs: &[preprocess::Epoch],
) -> Result<spectral::PsdEstimate, spectral::SpectralError> {
    let first = &epochs[0];
    let t_e = first.data.ncols();
    let seg = if config.welch.segment_len <= t_e {
        config.welch.segment_len
    } else {
        spectral::fallback_segment_len(t_e)
    };
    let mut acc = spectral::welch_psd(first, seg, config.welch.overlap_fraction)?;
    for ep in &epochs[1..] {
        let p = spectral::welch_psd(ep, seg, config.welch.overlap_fraction)?;
        acc.psd = acc.psd + p.psd;
    }
    acc.psd.mapv_inplace(|v| v / epochs.len() as f64);
    Ok(acc)
}

fn write_psd_csv(path: &Path, channels: usize, psd: &spectral::PsdEstimate) -> std::io::Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let headers: Vec<String> = (0..channels).map(|c| format!("ch{c}")).collect();
    writeln!(out, "freq_hz,{}", headers.join(","))?;
    for (k, f) in psd.freqs_hz.iter().enumerate() {
        let mut line = format!("{f}");
        for c in 0..channels {
            line.push_str(&format!(",{}", psd.psd[[c, k]]));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Extracts one feature row per manifest session into
/// `output_dir/features.csv`. Failing sessions are skipped and reported.
pub fn run_extract(config: &RunConfig, jobs: Option<usize>) -> Result<ExtractSummary, PipelineError> {
    config.validate()?;
    let manifest = load_manifest(config)?;
    std::fs::create_dir_all(&config.output_dir).map_err(io_err(&config.output_dir))?;

    let results: Vec<Result<(SessionFeatures, Option<(String, spectral::PsdEstimate)>), String>> =
        with_jobs(jobs, || {
            manifest
                .entries
                .par_iter()
                .map(|entry| session_features_for_entry(config, entry))
                .collect()
        });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut psds = Vec::new();
    for (entry, result) in manifest.entries.iter().zip(results) {
        match result {
            Ok((feats, psd)) => {
                rows.push(feats);
                if let Some(p) = psd {
                    psds.push((rows.len() - 1, p));
                }
            }
            Err(error) => failures.push(SessionFailure { path: entry.path.clone(), error }),
        }
    }
    if rows.is_empty() {
        return Err(PipelineError::AllSessionsFailed { attempted: manifest.entries.len() });
    }

    let features_path = config.features_path();
    features::write_features_csv(&features_path, &rows)
        .map_err(|e| PipelineError::Run(e.to_string()))?;

    if config.export_psd {
        let psd_dir = config.output_dir.join("psd");
        std::fs::create_dir_all(&psd_dir).map_err(io_err(&psd_dir))?;
        for (idx, (session_id, psd)) in psds.iter().enumerate() {
            let path = psd_dir.join(format!("{:03}_{}.csv", idx, sanitize(&psd.0)));
            let _ = session_id;
            write_psd_csv(&path, psd.1.psd.nrows(), &psd.1).map_err(io_err(&path))?;
        }
    }

    let summary = ExtractSummary {
        attempted: manifest.entries.len(),
        extracted: rows.len(),
        failures,
    };
    let summary_path = config.output_dir.join("extract_summary.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary).unwrap())
        .map_err(io_err(&summary_path))?;
    Ok(summary)
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Exit code for an extract run: 0 all good (or partial allowed), 2 partial
/// failure without `--allow-partial`. Total failure errors out upstream (3).
pub fn extract_exit_code(summary: &ExtractSummary, allow_partial: bool) -> i32 {
    if summary.failures.is_empty() || allow_partial {
        0
    } else {
        2
    }
}

fn load_features_and_split(
    config: &RunConfig,
) -> Result<(Vec<SessionFeatures>, features::DatasetSplit), PipelineError> {
    let rows = features::read_features_csv(config.features_path())
        .map_err(|e| match e {
            FeatureError::Io(source) => PipelineError::Io { path: config.features_path(), source },
            other => PipelineError::Run(other.to_string()),
        })?;
    let split = features::split_by_subject(&rows, config.split.ratios, config.seed)?;
    features::assert_subject_disjoint(&split).map_err(PipelineError::SplitLeakage)?;
    Ok((rows, split))
}

fn write_reports(
    config: &RunConfig,
    stem: &str,
    report: &MetricsReport,
) -> Result<(), PipelineError> {
    let json_path = config.output_dir.join(format!("{stem}.json"));
    std::fs::write(&json_path, serde_json::to_string_pretty(report).unwrap())
        .map_err(io_err(&json_path))?;
    let txt_path = config.output_dir.join(format!("{stem}.txt"));
    std::fs::write(&txt_path, report.to_text()).map_err(io_err(&txt_path))?;
    Ok(())
}

fn evaluate_rows(
    model: &TrainedModel,
    rows: &[SessionFeatures],
    class_names: &[String],
) -> Result<MetricsReport, PipelineError> {
    let (x, y) = design_matrix(rows);
    let (pred, scores) = model.predict(x.view())?;
    Ok(metrics::evaluate(&y, &pred, scores.view(), class_names)?)
}

/// Fits the configured single-hyperparameter pipeline on the train partition
/// and reports validation metrics.
pub fn run_train(config: &RunConfig, jobs: Option<usize>) -> Result<MetricsReport, PipelineError> {
    config.validate()?;
    let manifest = load_manifest(config)?;
    let (_, split) = load_features_and_split(config)?;
    let (train_x, train_y) = design_matrix(&split.train);
    let mut model = with_jobs(jobs, || {
        TrainedModel::fit(train_x.view(), &train_y, config.train_hyper(), config.seed)
    })?;
    model.split_seed = split.split_seed;
    model.split_ratios = split.ratios;

    features::write_split_file(config.split_path(), &split)?;
    std::fs::write(config.model_path(), model.to_json()).map_err(io_err(&config.model_path()))?;

    let report = evaluate_rows(&model, &split.val, &manifest.class_names)?;
    write_reports(config, "val_report", &report)?;
    Ok(report)
}

/// Grid search on train/validation, refit of the winner, model + report
/// written to the output directory.
pub fn run_gridsearch(
    config: &RunConfig,
    jobs: Option<usize>,
) -> Result<classify::GridSearchReport, PipelineError> {
    config.validate()?;
    let (_, split) = load_features_and_split(config)?;
    let grid = config.grid();
    let (report, model) = with_jobs(jobs, || {
        classify::grid_search(&split, &grid, config.seed, config.refit_with_val)
    })?;

    features::write_split_file(config.split_path(), &split)?;
    std::fs::write(config.model_path(), model.to_json()).map_err(io_err(&config.model_path()))?;
    let report_path = config.output_dir.join("grid_report.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&report).unwrap())
        .map_err(io_err(&report_path))?;
    Ok(report)
}

/// Scores the test partition exactly once with a previously written model.
/// The split file on disk is authoritative and is checked for leakage.
pub fn run_evaluate(config: &RunConfig, _jobs: Option<usize>) -> Result<MetricsReport, PipelineError> {
    config.validate()?;
    let manifest = load_manifest(config)?;

    let model_json = std::fs::read_to_string(config.model_path())
        .map_err(io_err(&config.model_path()))?;
    let model = TrainedModel::from_json(&model_json)
        .map_err(|e| PipelineError::ModelSchema(e.to_string()))?;

    let rows = features::read_features_csv(config.features_path()).map_err(|e| match e {
        FeatureError::Io(source) => PipelineError::Io { path: config.features_path(), source },
        other => PipelineError::Run(other.to_string()),
    })?;

    let assignment = read_split_assignments(&config.split_path())?;
    let mut test_rows = Vec::new();
    for row in &rows {
        match assignment.get(&row.subject_id) {
            Some(Partition::Test) => test_rows.push(row.clone()),
            Some(_) => {}
            None => {
                return Err(PipelineError::SplitLeakage(format!(
                    "subject {:?} missing from the split file",
                    row.subject_id
                )))
            }
        }
    }
    if test_rows.is_empty() {
        return Err(PipelineError::Run("split file leaves the test partition empty".into()));
    }

    let report = evaluate_rows(&model, &test_rows, &manifest.class_names)?;
    write_reports(config, "test_report", &report)?;
    let confusion_path = config.output_dir.join("confusion.csv");
    std::fs::write(&confusion_path, report.confusion_csv()).map_err(io_err(&confusion_path))?;
    Ok(report)
}

/// Split-file parser that treats a subject listed under two partitions as
/// leakage rather than last-line-wins.
fn read_split_assignments(path: &Path) -> Result<BTreeMap<String, Partition>, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let (subj, part) = line
            .split_once(',')
            .ok_or_else(|| PipelineError::Run(format!("split file line {}", i + 1)))?;
        let part = match part.trim() {
            "train" => Partition::Train,
            "val" => Partition::Val,
            "test" => Partition::Test,
            other => return Err(PipelineError::Run(format!("unknown partition {other:?}"))),
        };
        if let Some(prev) = map.insert(subj.trim().to_string(), part) {
            if prev != part {
                return Err(PipelineError::SplitLeakage(format!(
                    "subject {:?} assigned to both {prev} and {part}",
                    subj.trim()
                )));
            }
        }
    }
    if map.is_empty() {
        return Err(PipelineError::Run("split file has no assignments".into()));
    }
    Ok(map)
}

/// KL diagnostics over a directory of attention tensor files.
pub fn run_kl(
    config: &RunConfig,
    dir_override: Option<&Path>,
    jobs: Option<usize>,
) -> Result<attention::KlReport, PipelineError> {
    let dir = dir_override
        .map(Path::to_path_buf)
        .or_else(|| config.attention_dir.clone())
        .ok_or_else(|| PipelineError::Config("no attention directory configured".into()))?;
    let maps = attention::load_attention_dir(&dir).map_err(|e| match e {
        attention::AttentionError::Io(source) => PipelineError::Io { path: dir.clone(), source },
        other => PipelineError::Run(other.to_string()),
    })?;
    let report = with_jobs(jobs, || attention::pairwise_kl_report(&maps))
        .map_err(|e| PipelineError::Run(e.to_string()))?;

    std::fs::create_dir_all(&config.output_dir).map_err(io_err(&config.output_dir))?;
    let json_path = config.output_dir.join("kl_report.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&report).unwrap())
        .map_err(io_err(&json_path))?;
    let txt_path = config.output_dir.join("kl_report.txt");
    let text = format!(
        "KL(Correct||Incorrect)  {:.6e}\nKL(Incorrect||Correct)  {:.6e}\n\
         pairs {}  (correct {}, incorrect {})\nstd(Correct||Incorrect) {:.6e}\n",
        report.kl_correct_vs_incorrect,
        report.kl_incorrect_vs_correct,
        report.pair_count,
        report.n_correct,
        report.n_incorrect,
        report.std_correct_vs_incorrect,
    );
    std::fs::write(&txt_path, text).map_err(io_err(&txt_path))?;
    Ok(report)
}

/// Per-band decomposition of every manifest session, written as CSV matrices
/// for external model code.
pub fn run_bandsplit(config: &RunConfig, jobs: Option<usize>) -> Result<usize, PipelineError> {
    config.validate()?;
    let manifest = load_manifest(config)?;
    let bands_dir = config.output_dir.join("bands");
    std::fs::create_dir_all(&bands_dir).map_err(io_err(&bands_dir))?;

    let results: Vec<Result<usize, String>> = with_jobs(jobs, || {
        manifest
            .entries
            .par_iter()
            .map(|entry| {
                let rec = load_recording(config, entry).map_err(|e| e.to_string())?;
                let prepped = preprocess_recording(config, &rec).map_err(|e| e.to_string())?;
                let bands = attention::band_split(&prepped).map_err(|e| e.to_string())?;
                let mut written = 0;
                for (band_name, band_rec) in bands {
                    let path = bands_dir
                        .join(format!("{}_{}.csv", sanitize(&rec.session_id), band_name));
                    ingest::write_csv_matrix(&path, &band_rec).map_err(|e| e.to_string())?;
                    written += 1;
                }
                Ok(written)
            })
            .collect()
    });

    let mut total = 0;
    let mut errors = Vec::new();
    for (entry, r) in manifest.entries.iter().zip(results) {
        match r {
            Ok(n) => total += n,
            Err(e) => errors.push(format!("{}: {e}", entry.path)),
        }
    }
    if total == 0 {
        return Err(PipelineError::AllSessionsFailed { attempted: manifest.entries.len() });
    }
    if !errors.is_empty() {
        return Err(PipelineError::Run(format!("band split failures: {}", errors.join("; "))));
    }
    Ok(total)
}

/// `--dry-run`: validate the config, the manifest, and that every referenced
/// session file exists, touching nothing.
pub fn run_dry_run(config: &RunConfig) -> Result<(), PipelineError> {
    config.validate()?;
    let manifest = load_manifest(config)?;
    for entry in &manifest.entries {
        let path = resolve_session_path(config, &entry.path);
        if !path.is_file() {
            return Err(PipelineError::Io {
                path,
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "missing session file"),
            });
        }
    }
    Ok(())
}
