//! Grid search over pipeline hyperparameters, selecting by validation
//! macro-F1 with ties broken toward the earliest candidate in declared grid
//! order, then refitting the winner (on train ∪ validation by default).

use super::{ClassifyError, Hyper, QdaHyper, RfHyper, TrainedModel};
use crate::features::{DatasetSplit, SessionFeatures, FEATURE_DIM};
use crate::metrics;
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PipelineKind {
    Qda,
    Rf,
}

/// Declared default QDA grid: λ outer, retained variance inner.
pub fn default_qda_grid() -> Vec<Hyper> {
    let lambdas = [1e-4, 1e-3, 1e-2, 0.1, 0.5];
    let variances = [0.90, 0.95, 0.99, 1.0];
    let mut grid = Vec::with_capacity(lambdas.len() * variances.len());
    for &reg_lambda in &lambdas {
        for &retained_variance in &variances {
            grid.push(Hyper::Qda(QdaHyper { reg_lambda, retained_variance }));
        }
    }
    grid
}

/// Declared default forest grid: n_estimators outer, then max_depth, then
/// min_samples_leaf. PCA keeps `retained_variance` (1.0 = rotation only).
pub fn default_rf_grid(retained_variance: f64) -> Vec<Hyper> {
    let n_estimators = [100, 300, 500];
    let max_depths = [0, 4, 8, 16];
    let min_leafs = [1, 2, 5];
    let mut grid = Vec::new();
    for &n in &n_estimators {
        for &d in &max_depths {
            for &l in &min_leafs {
                grid.push(Hyper::Rf(RfHyper {
                    n_estimators: n,
                    max_depth: d,
                    min_samples_leaf: l,
                    retained_variance,
                }));
            }
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub hyper: Hyper,
    /// `None` when this configuration failed to fit (e.g. singular
    /// covariance at tiny λ).
    pub val_macro_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchReport {
    pub candidates: Vec<Candidate>,
    pub best: usize,
    pub refit_with_val: bool,
}

/// Feature rows → (n×13 design matrix, labels).
pub fn design_matrix(features: &[SessionFeatures]) -> (Array2<f64>, Vec<usize>) {
    let n = features.len();
    let mut x = Array2::<f64>::zeros((n, FEATURE_DIM));
    let mut y = Vec::with_capacity(n);
    for (i, f) in features.iter().enumerate() {
        let v = f.to_vector();
        for (j, val) in v.iter().enumerate() {
            x[[i, j]] = *val;
        }
        y.push(f.label);
    }
    (x, y)
}

fn val_macro_f1(model: &TrainedModel, x: &Array2<f64>, y: &[usize]) -> Result<f64, ClassifyError> {
    let (pred, _) = model.predict(x.view())?;
    let k = model.n_classes.max(y.iter().copied().max().map_or(0, |m| m + 1));
    let confusion = metrics::confusion_matrix(y, &pred, k)
        .map_err(|e| ClassifyError::BadHyperparameters(e.to_string()))?;
    let (_, _, f1, _) = metrics::macro_prf(confusion.view());
    Ok(f1)
}

/// Fits every grid point on the training partition, scores it on validation,
/// picks the best, and refits that configuration (train ∪ val when
/// `refit_with_val`). The test partition is untouched here; scoring it
/// happens exactly once, downstream.
pub fn grid_search(
    split: &DatasetSplit,
    grid: &[Hyper],
    seed: u64,
    refit_with_val: bool,
) -> Result<(GridSearchReport, TrainedModel), ClassifyError> {
    if grid.is_empty() {
        return Err(ClassifyError::EmptyGrid);
    }
    let (train_x, train_y) = design_matrix(&split.train);
    let (val_x, val_y) = design_matrix(&split.val);

    let candidates: Vec<Candidate> = grid
        .par_iter()
        .map(|&hyper| {
            let score = TrainedModel::fit(train_x.view(), &train_y, hyper, seed)
                .and_then(|model| val_macro_f1(&model, &val_x, &val_y))
                .ok();
            Candidate { hyper, val_macro_f1: score }
        })
        .collect();

    let best = candidates
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.val_macro_f1.map(|s| (i, s)))
        .max_by(|(ia, sa), (ib, sb)| {
            // strict: later candidates win only with a strictly higher score
            sa.partial_cmp(sb).unwrap().then(ib.cmp(ia))
        })
        .map(|(i, _)| i)
        .ok_or(ClassifyError::BadHyperparameters("every grid point failed to fit".into()))?;

    let refit_rows: Vec<SessionFeatures> = if refit_with_val {
        split.train.iter().chain(split.val.iter()).cloned().collect()
    } else {
        split.train.clone()
    };
    let (refit_x, refit_y) = design_matrix(&refit_rows);
    let mut model = TrainedModel::fit(refit_x.view(), &refit_y, grid[best], seed)?;
    let report = GridSearchReport { candidates, best, refit_with_val };
    model.grid_report = Some(report.clone());
    model.split_seed = split.split_seed;
    model.split_ratios = split.ratios;
    Ok((report, model))
}
