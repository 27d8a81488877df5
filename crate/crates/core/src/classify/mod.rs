//! Leak-free classification pipelines: train-only z-scoring, PCA, regularized
//! QDA and random forests, grid search maximizing validation macro-F1, and a
//! versioned JSON model format.

pub mod forest;
pub mod grid;
pub mod pca;
pub mod qda;
pub mod standardize;

pub use forest::{ForestModel, ForestParams};
pub use grid::{default_qda_grid, default_rf_grid, grid_search, Candidate, GridSearchReport, PipelineKind};
pub use pca::PcaModel;
pub use qda::QdaModel;
pub use standardize::Standardizer;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use std::fmt;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug)]
pub enum ClassifyError {
    TooFewRows { rows: usize, needed: usize },
    DegenerateMatrix,
    ClassTooSmall { class: usize, samples: usize },
    /// Cholesky failed after regularization — λ too small for this data.
    SingularCovariance { class: usize },
    DimensionMismatch { expected: usize, got: usize, what: &'static str },
    EmptyTrainingSet,
    BadHyperparameters(String),
    EmptyGrid,
    /// Model file failed schema validation (wrong version or shape).
    ModelSchema(String),
}

impl fmt::Display for ClassifyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::TooFewRows { rows, needed } => write!(f, "{rows} rows, need at least {needed}"),
            Self::DegenerateMatrix => write!(f, "matrix has no variance"),
            Self::ClassTooSmall { class, samples } => {
                write!(f, "class {class} has {samples} samples, need at least 2")
            }
            Self::SingularCovariance { class } => {
                write!(f, "class {class} covariance not positive definite (increase lambda)")
            }
            Self::DimensionMismatch { expected, got, what } => {
                write!(f, "{what}: expected {expected}, got {got}")
            }
            Self::EmptyTrainingSet => write!(f, "training set is empty"),
            Self::BadHyperparameters(p) => write!(f, "bad hyperparameters: {p}"),
            Self::EmptyGrid => write!(f, "hyperparameter grid is empty"),
            Self::ModelSchema(msg) => write!(f, "model schema mismatch: {msg}"),
        }
    }
}

impl std::error::Error for ClassifyError {}

/// QDA hyperparameters tuned by the grid search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QdaHyper {
    pub reg_lambda: f64,
    pub retained_variance: f64,
}

/// Forest hyperparameters tuned by the grid search. PCA retained variance is
/// fixed per run (default 1.0 — a pure rotation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfHyper {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub retained_variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Hyper {
    Qda(QdaHyper),
    Rf(RfHyper),
}

impl Hyper {
    pub fn retained_variance(&self) -> f64 {
        match self {
            Self::Qda(h) => h.retained_variance,
            Self::Rf(h) => h.retained_variance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ClassifierModel {
    Qda(QdaModel),
    Forest(ForestModel),
}

/// Everything needed to score new sessions: normalization and projection
/// fitted on training data only, plus the classifier and its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub version: u32,
    pub kind: String,
    pub seed: u64,
    pub split_seed: u64,
    pub split_ratios: [f64; 3],
    pub n_classes: usize,
    pub hyper: Hyper,
    pub standardizer: Standardizer,
    pub pca: PcaModel,
    pub classifier: ClassifierModel,
    pub grid_report: Option<GridSearchReport>,
}

impl TrainedModel {
    /// Fits standardizer → PCA → classifier on `(x, y)` only.
    pub fn fit(
        x: ArrayView2<f64>,
        y: &[usize],
        hyper: Hyper,
        seed: u64,
    ) -> Result<Self, ClassifyError> {
        let standardizer = Standardizer::fit(x)?;
        let standardized = standardizer.transform(x);
        let pca = PcaModel::fit(standardized.view(), hyper.retained_variance())?;
        let projected = pca.project(standardized.view());
        let n_classes = y.iter().copied().max().map_or(0, |m| m + 1);
        let (kind, classifier) = match hyper {
            Hyper::Qda(h) => (
                "qda",
                ClassifierModel::Qda(QdaModel::fit(projected.view(), y, h.reg_lambda)?),
            ),
            Hyper::Rf(h) => {
                let params = ForestParams {
                    n_estimators: h.n_estimators,
                    max_depth: h.max_depth,
                    min_samples_leaf: h.min_samples_leaf,
                    features_per_split: 0,
                };
                ("rf", ClassifierModel::Forest(ForestModel::fit(projected.view(), y, params, seed)?))
            }
        };
        Ok(Self {
            version: MODEL_SCHEMA_VERSION,
            kind: kind.into(),
            seed,
            split_seed: 0,
            split_ratios: [0.0; 3],
            n_classes,
            hyper,
            standardizer,
            pca,
            classifier,
            grid_report: None,
        })
    }

    /// Labels plus n×K probability scores for raw (untransformed) features.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<(Vec<usize>, Array2<f64>), ClassifyError> {
        let standardized = self.standardizer.transform(x);
        let projected = self.pca.project(standardized.view());
        match &self.classifier {
            ClassifierModel::Qda(m) => m.predict_proba(projected.view()),
            ClassifierModel::Forest(m) => m.predict(projected.view()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization cannot fail")
    }

    pub fn from_json(json: &str) -> Result<Self, ClassifyError> {
        let model: Self =
            serde_json::from_str(json).map_err(|e| ClassifyError::ModelSchema(e.to_string()))?;
        if model.version != MODEL_SCHEMA_VERSION {
            return Err(ClassifyError::ModelSchema(format!(
                "version {} (this build reads {})",
                model.version, MODEL_SCHEMA_VERSION
            )));
        }
        Ok(model)
    }
}
