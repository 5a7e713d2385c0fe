//! Numeric design matrix with column metadata and an integer label vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a column was produced, and therefore how learners may treat it.
/// One-hot columns are named `Parent=value`; scaling skips them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnKind {
    Numeric,
    CategoricalOneHot,
}

/// Row-major n × d matrix, a length-n label vector, and per-column metadata.
///
/// Invariants (checked at construction): no NaN/infinite entries, every row
/// has exactly d entries, every label indexes into `class_names`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub column_names: Vec<String>,
    pub column_kinds: Vec<ColumnKind>,
    values: Vec<f64>,
    n_rows: usize,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(
        column_names: Vec<String>,
        column_kinds: Vec<ColumnKind>,
        values: Vec<f64>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let d = column_names.len();
        if column_kinds.len() != d {
            return Err(Error::input("column_kinds length must match column_names"));
        }
        if d == 0 || values.len() % d != 0 {
            return Err(Error::input("values length must be a multiple of the column count"));
        }
        let n_rows = values.len() / d;
        if labels.len() != n_rows {
            return Err(Error::input("labels length must match the row count"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("matrix contains NaN or infinite entries"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::input(format!(
                "label {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        Ok(FeatureMatrix {
            column_names,
            column_kinds,
            values,
            n_rows,
            labels,
            class_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_cols();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols() + col]
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_rows).map(move |i| self.get(i, col))
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    /// New matrix restricted to the given row indices (in the given order).
    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        let d = self.n_cols();
        let mut values = Vec::with_capacity(indices.len() * d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        FeatureMatrix {
            column_names: self.column_names.clone(),
            column_kinds: self.column_kinds.clone(),
            values,
            n_rows: indices.len(),
            labels,
            class_names: self.class_names.clone(),
        }
    }

    /// Count of rows per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_checks_shape_and_finiteness() {
        let names = vec!["a".to_string(), "b".to_string()];
        let kinds = vec![ColumnKind::Numeric, ColumnKind::Numeric];
        let m = FeatureMatrix::new(
            names.clone(),
            kinds.clone(),
            vec![1.0, 2.0, 3.0, 4.0],
            vec![0, 1],
            vec!["0".into(), "1".into()],
        )
        .unwrap();
        assert_eq!(m.n_rows(), 2);
        assert_eq!(m.row(1), &[3.0, 4.0]);

        assert!(FeatureMatrix::new(
            names.clone(),
            kinds.clone(),
            vec![1.0, f64::NAN, 3.0, 4.0],
            vec![0, 1],
            vec!["0".into(), "1".into()],
        )
        .is_err());

        assert!(FeatureMatrix::new(
            names,
            kinds,
            vec![1.0, 2.0],
            vec![3],
            vec!["0".into(), "1".into()],
        )
        .is_err());
    }

    #[test]
    fn row_selection_keeps_order() {
        let m = FeatureMatrix::new(
            vec!["a".into()],
            vec![ColumnKind::Numeric],
            vec![10.0, 20.0, 30.0],
            vec![0, 1, 0],
            vec!["0".into(), "1".into()],
        )
        .unwrap();
        let s = m.select_rows(&[2, 0]);
        assert_eq!(s.row(0), &[30.0]);
        assert_eq!(s.labels, vec![0, 0]);
    }
}
