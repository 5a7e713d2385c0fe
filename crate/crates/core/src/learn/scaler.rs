//! Column standardization for the linear and kernel learners.
//!
//! Parameters are fit on training rows only and frozen into the model, so
//! prediction applies exactly the transform training saw and test data never
//! leaks into the fit. One-hot columns pass through unscaled.

use serde::{Deserialize, Serialize};

use crate::matrix::{ColumnKind, FeatureMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Scaler {
    /// Fits per-column mean and population standard deviation on the
    /// numeric columns of `matrix`; one-hot columns get the identity
    /// transform. Constant columns get sd 1 so they map to exactly 0.
    pub fn fit(matrix: &FeatureMatrix) -> Scaler {
        let n = matrix.n_rows() as f64;
        let d = matrix.n_cols();
        let mut means = vec![0.0; d];
        let mut sds = vec![1.0; d];
        for col in 0..d {
            if matrix.column_kinds[col] != ColumnKind::Numeric {
                continue;
            }
            let mean = matrix.column(col).sum::<f64>() / n;
            let var = matrix.column(col).map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            means[col] = mean;
            sds[col] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Scaler { means, sds }
    }

    pub fn transform_row(&self, row: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            row.iter()
                .zip(self.means.iter().zip(&self.sds))
                .map(|(&v, (&m, &s))| (v - m) / s),
        );
    }

    /// Whole-matrix transform into a flat row-major buffer.
    pub fn transform(&self, matrix: &FeatureMatrix) -> Vec<f64> {
        let mut out = Vec::with_capacity(matrix.n_rows() * matrix.n_cols());
        let mut row_buf = Vec::with_capacity(matrix.n_cols());
        for i in 0..matrix.n_rows() {
            self.transform_row(matrix.row(i), &mut row_buf);
            out.extend_from_slice(&row_buf);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardized_columns_have_zero_mean_unit_sd() {
        let m = FeatureMatrix::new(
            vec!["x".into(), "c=1".into()],
            vec![ColumnKind::Numeric, ColumnKind::CategoricalOneHot],
            vec![1.0, 1.0, 2.0, 0.0, 3.0, 1.0, 10.0, 0.0],
            vec![0, 1, 0, 1],
            vec!["0".into(), "1".into()],
        )
        .unwrap();
        let scaler = Scaler::fit(&m);
        let flat = scaler.transform(&m);
        let n = m.n_rows() as f64;
        let mean: f64 = (0..m.n_rows()).map(|i| flat[i * 2]).sum::<f64>() / n;
        let var: f64 = (0..m.n_rows()).map(|i| (flat[i * 2] - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() <= 1e-9);
        assert!((var.sqrt() - 1.0).abs() <= 1e-9);
        // one-hot column untouched
        assert_eq!(flat[1], 1.0);
        assert_eq!(flat[3], 0.0);
    }

    #[test]
    fn constant_columns_map_to_zero() {
        let m = FeatureMatrix::new(
            vec!["x".into()],
            vec![ColumnKind::Numeric],
            vec![5.0, 5.0, 5.0],
            vec![0, 0, 1],
            vec!["0".into(), "1".into()],
        )
        .unwrap();
        let scaler = Scaler::fit(&m);
        assert!(scaler.transform(&m).iter().all(|&v| v == 0.0));
    }
}
