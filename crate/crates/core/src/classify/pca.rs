//! PCA by singular value decomposition of the centered training matrix. The
//! component count is the smallest k whose cumulative explained variance
//! reaches the configured target; a target of 1.0 keeps every component up
//! to numerical rank.

use super::ClassifyError;
use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub center: Vec<f64>,
    /// k×d, orthonormal rows.
    pub components: Array2<f64>,
    pub explained_variance_ratio: Vec<f64>,
    pub retained_variance: f64,
}

impl PcaModel {
    pub fn fit(x: ArrayView2<f64>, retained_variance: f64) -> Result<Self, ClassifyError> {
        assert!(
            retained_variance > 0.0 && retained_variance <= 1.0,
            "retained variance must be in (0, 1]"
        );
        let (n, d) = (x.nrows(), x.ncols());
        if n < 2 {
            return Err(ClassifyError::TooFewRows { rows: n, needed: 2 });
        }

        let center: Vec<f64> = (0..d).map(|j| x.column(j).sum() / n as f64).collect();
        let centered = DMatrix::from_fn(n, d, |i, j| x[[i, j]] - center[j]);
        let svd = centered.svd(false, true);
        let v_t = svd.v_t.as_ref().expect("svd requested v_t");
        let singular: Vec<f64> = svd.singular_values.iter().copied().collect();

        let total_var: f64 = singular.iter().map(|s| s * s).sum();
        if total_var <= 0.0 {
            return Err(ClassifyError::DegenerateMatrix);
        }
        let rank_tol = singular[0] * (n.max(d) as f64) * f64::EPSILON;
        let rank = singular.iter().filter(|&&s| s > rank_tol).count().max(1);

        let k = if retained_variance >= 1.0 {
            rank
        } else {
            let mut cum = 0.0;
            let mut k = rank;
            for (i, s) in singular.iter().take(rank).enumerate() {
                cum += s * s / total_var;
                if cum >= retained_variance - 1e-12 {
                    k = i + 1;
                    break;
                }
            }
            k
        };

        let components = Array2::from_shape_fn((k, d), |(i, j)| v_t[(i, j)]);
        let explained_variance_ratio: Vec<f64> =
            singular.iter().take(k).map(|s| s * s / total_var).collect();

        Ok(Self { center, components, explained_variance_ratio, retained_variance })
    }

    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    /// Projects rows of `x`: `(x - center) · componentsᵀ`.
    pub fn project(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let (n, d) = (x.nrows(), x.ncols());
        assert_eq!(d, self.center.len(), "feature dimension mismatch");
        let k = self.n_components();
        let mut out = Array2::<f64>::zeros((n, k));
        for i in 0..n {
            for c in 0..k {
                let mut acc = 0.0;
                for j in 0..d {
                    acc += (x[[i, j]] - self.center[j]) * self.components[[c, j]];
                }
                out[[i, c]] = acc;
            }
        }
        out
    }

    /// Maps projected rows back to the original space (exact only at full
    /// rank).
    pub fn reconstruct(&self, projected: ArrayView2<f64>) -> Array2<f64> {
        let (n, k) = (projected.nrows(), projected.ncols());
        assert_eq!(k, self.n_components());
        let d = self.center.len();
        let mut out = Array2::<f64>::zeros((n, d));
        for i in 0..n {
            for j in 0..d {
                let mut acc = self.center[j];
                for c in 0..k {
                    acc += projected[[i, c]] * self.components[[c, j]];
                }
                out[[i, j]] = acc;
            }
        }
        out
    }
}
