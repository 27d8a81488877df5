//! Regularized quadratic discriminant analysis: one Gaussian per class with
//! its own covariance, shrunk toward a spherical target, decisions by
//! maximum posterior.

use super::ClassifyError;
use nalgebra::{Cholesky, DMatrix, DVector};
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QdaModel {
    /// Class frequencies in the training data, summing to 1.
    pub class_priors: Vec<f64>,
    /// K×k class means.
    pub class_means: Array2<f64>,
    /// Regularized covariances, one k×k matrix per class (row-major nested).
    pub class_covariances: Vec<Array2<f64>>,
    pub reg_lambda: f64,
}

impl QdaModel {
    /// Fits per-class means and covariances (divisor `n_c - 1`), then shrinks
    /// each covariance as `(1-λ)Σ + λ·(trace(Σ)/k)·I`. Every class needs at
    /// least two samples, and every regularized covariance must admit a
    /// Cholesky factorization.
    pub fn fit(x: ArrayView2<f64>, y: &[usize], reg_lambda: f64) -> Result<Self, ClassifyError> {
        assert!((0.0..=1.0).contains(&reg_lambda), "lambda must be in [0, 1]");
        let (n, k_dim) = (x.nrows(), x.ncols());
        if n != y.len() {
            return Err(ClassifyError::DimensionMismatch {
                expected: n,
                got: y.len(),
                what: "label count",
            });
        }
        let n_classes = y.iter().copied().max().map_or(0, |m| m + 1);
        if n_classes < 2 {
            return Err(ClassifyError::ClassTooSmall { class: n_classes, samples: n });
        }

        let mut class_priors = Vec::with_capacity(n_classes);
        let mut class_means = Array2::<f64>::zeros((n_classes, k_dim));
        let mut class_covariances = Vec::with_capacity(n_classes);
        for c in 0..n_classes {
            let rows: Vec<usize> = (0..n).filter(|&i| y[i] == c).collect();
            let n_c = rows.len();
            if n_c < 2 {
                return Err(ClassifyError::ClassTooSmall { class: c, samples: n_c });
            }
            for j in 0..k_dim {
                class_means[[c, j]] = rows.iter().map(|&i| x[[i, j]]).sum::<f64>() / n_c as f64;
            }
            let mut cov = Array2::<f64>::zeros((k_dim, k_dim));
            for &i in &rows {
                for a in 0..k_dim {
                    let da = x[[i, a]] - class_means[[c, a]];
                    for b in a..k_dim {
                        let db = x[[i, b]] - class_means[[c, b]];
                        cov[[a, b]] += da * db;
                    }
                }
            }
            let denom = (n_c - 1) as f64;
            for a in 0..k_dim {
                for b in a..k_dim {
                    cov[[a, b]] /= denom;
                    cov[[b, a]] = cov[[a, b]];
                }
            }
            // Shrink toward the scaled identity preserving total variance.
            let trace: f64 = (0..k_dim).map(|i| cov[[i, i]]).sum();
            let target = trace / k_dim as f64;
            for a in 0..k_dim {
                for b in 0..k_dim {
                    cov[[a, b]] *= 1.0 - reg_lambda;
                }
                cov[[a, a]] += reg_lambda * target;
            }
            class_priors.push(n_c as f64 / n as f64);
            class_covariances.push(cov);
        }

        let model = Self { class_priors, class_means, class_covariances, reg_lambda };
        // Fail fast when a covariance is not positive definite.
        model.factorize()?;
        Ok(model)
    }

    fn factorize(&self) -> Result<Vec<(Cholesky<f64, nalgebra::Dyn>, f64)>, ClassifyError> {
        let k = self.class_means.ncols();
        self.class_covariances
            .iter()
            .enumerate()
            .map(|(c, cov)| {
                let m = DMatrix::from_fn(k, k, |i, j| cov[[i, j]]);
                let chol = Cholesky::new(m)
                    .ok_or(ClassifyError::SingularCovariance { class: c })?;
                let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
                Ok((chol, log_det))
            })
            .collect()
    }

    /// Predicted labels plus the n×K log-posterior matrix. Ties resolve to
    /// the lower class index.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<(Vec<usize>, Array2<f64>), ClassifyError> {
        let k_dim = self.class_means.ncols();
        if x.ncols() != k_dim {
            return Err(ClassifyError::DimensionMismatch {
                expected: k_dim,
                got: x.ncols(),
                what: "feature dimension",
            });
        }
        let factors = self.factorize()?;
        let n = x.nrows();
        let n_classes = self.class_priors.len();
        let mut log_post = Array2::<f64>::zeros((n, n_classes));
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let mut discriminants = Vec::with_capacity(n_classes);
            for (c, (chol, log_det)) in factors.iter().enumerate() {
                let diff =
                    DVector::from_fn(k_dim, |j, _| x[[i, j]] - self.class_means[[c, j]]);
                // Quadratic form via the triangular solve: ‖L⁻¹(x-μ)‖².
                let solved = chol.l().solve_lower_triangular(&diff).expect("L is invertible");
                let quad = solved.norm_squared();
                discriminants.push(-0.5 * quad - 0.5 * log_det + self.class_priors[c].ln());
            }
            // log-softmax over discriminants
            let max = discriminants.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let log_sum = max
                + discriminants.iter().map(|d| (d - max).exp()).sum::<f64>().ln();
            let mut best = 0usize;
            for (c, d) in discriminants.iter().enumerate() {
                log_post[[i, c]] = d - log_sum;
                if *d > discriminants[best] {
                    best = c;
                }
            }
            labels.push(best);
        }
        Ok((labels, log_post))
    }

    /// Posterior probabilities (softmax of discriminants), n×K.
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<(Vec<usize>, Array2<f64>), ClassifyError> {
        let (labels, log_post) = self.predict(x)?;
        Ok((labels, log_post.mapv(f64::exp)))
    }
}
