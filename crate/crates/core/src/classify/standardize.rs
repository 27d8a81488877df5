//! Z-score normalization with statistics taken from the training partition
//! only. Applying the transform never touches the stored statistics, so
//! validation/test data cannot leak into them by construction.

use super::ClassifyError;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    /// Population standard deviations (divisor n); zero-variance columns are
    /// replaced by 1 and flagged in `degenerate_columns`.
    pub stds: Vec<f64>,
    pub degenerate_columns: Vec<usize>,
}

impl Standardizer {
    pub fn fit(train: ArrayView2<f64>) -> Result<Self, ClassifyError> {
        let n = train.nrows();
        if n < 2 {
            return Err(ClassifyError::TooFewRows { rows: n, needed: 2 });
        }
        let d = train.ncols();
        let mut means = Vec::with_capacity(d);
        let mut stds = Vec::with_capacity(d);
        let mut degenerate_columns = Vec::new();
        for j in 0..d {
            let col = train.column(j);
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            let std = var.sqrt();
            means.push(mean);
            if std == 0.0 {
                stds.push(1.0);
                degenerate_columns.push(j);
            } else {
                stds.push(std);
            }
        }
        Ok(Self { means, stds, degenerate_columns })
    }

    /// Applies the stored training statistics to any matrix.
    pub fn transform(&self, x: ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(x.ncols(), self.means.len(), "feature dimension mismatch");
        let mut out = x.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.means[j], self.stds[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn two_point_column_standardizes_to_plus_minus_one() {
        let x = arr2(&[[1.0], [3.0]]);
        let s = Standardizer::fit(x.view()).unwrap();
        assert_eq!(s.means, vec![2.0]);
        assert_eq!(s.stds, vec![1.0]);
        let t = s.transform(x.view());
        assert_eq!(t, arr2(&[[-1.0], [1.0]]));
    }

    #[test]
    fn training_matrix_transforms_to_zero_mean_unit_std() {
        let mut rng = crate::rng::Xoshiro256::seed_from(2);
        let x = Array2::from_shape_fn((50, 4), |_| 3.0 * rng.next_gaussian() + 10.0);
        let s = Standardizer::fit(x.view()).unwrap();
        let t = s.transform(x.view());
        for j in 0..4 {
            let col = t.column(j);
            let mean = col.sum() / 50.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 50.0;
            assert!(mean.abs() < 1e-9);
            assert!((var.sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_column_is_flagged_and_zeroed() {
        let x = arr2(&[[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]]);
        let s = Standardizer::fit(x.view()).unwrap();
        assert_eq!(s.degenerate_columns, vec![0]);
        assert_eq!(s.stds[0], 1.0);
        let t = s.transform(x.view());
        assert!(t.column(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn test_statistics_never_recomputed() {
        let train = arr2(&[[0.0], [2.0]]);
        let s = Standardizer::fit(train.view()).unwrap();
        let test = arr2(&[[10.0], [20.0]]);
        let t = s.transform(test.view());
        // transformed with train stats (mean 1, std 1), not test stats
        assert_eq!(t, arr2(&[[9.0], [19.0]]));
        let col_mean = t.column(0).sum() / 2.0;
        assert!(col_mean != 0.0);
    }

    #[test]
    fn single_row_is_rejected() {
        let x = arr2(&[[1.0, 2.0]]);
        assert!(matches!(
            Standardizer::fit(x.view()),
            Err(ClassifyError::TooFewRows { rows: 1, needed: 2 })
        ));
    }
}
