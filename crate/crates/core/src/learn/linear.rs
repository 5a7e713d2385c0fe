//! L2-regularized logistic regression, full-batch gradient descent with
//! backtracking line search.
//!
//! Objective: (1/C)·½‖w‖² + Σᵢ log(1 + exp(−yᵢ(w·xᵢ + b))), y ∈ {−1, +1},
//! bias unregularized. Numeric columns are standardized internally on the
//! training rows and the transform is frozen into the model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

use super::scaler::Scaler;
use super::{require_rows, FeatureSchema, LearnedParams, ModelKind, TrainedModel, TrainingMeta};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    /// Inverse regularization strength; larger C = weaker regularization.
    pub c: f64,
    pub max_iterations: usize,
    /// Convergence threshold on the gradient max-norm.
    pub tolerance: f64,
}

impl LinearParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(Error::config("c", "must be > 0"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations", "must be ≥ 1"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::config("tolerance", "must be > 0"));
        }
        Ok(())
    }
}

/// log(1 + eᶻ), stable for large |z|.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// σ(z), stable for large |z|.
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// The logistic objective on a fixed (standardized) design; exposed so that
/// its analytic gradient can be checked against finite differences.
pub struct LogisticObjective {
    /// Row-major n × d design.
    pub design: Vec<f64>,
    pub d: usize,
    /// Labels in {−1, +1}.
    pub y: Vec<f64>,
    pub c: f64,
}

impl LogisticObjective {
    pub fn from_matrix(matrix: &FeatureMatrix, scaler: &Scaler, c: f64) -> Result<Self> {
        if matrix.n_classes() != 2 {
            return Err(Error::input(format!(
                "logistic regression requires binary labels; got {} classes",
                matrix.n_classes()
            )));
        }
        let y = matrix
            .labels
            .iter()
            .map(|&l| if l == 1 { 1.0 } else { -1.0 })
            .collect();
        Ok(LogisticObjective {
            design: scaler.transform(matrix),
            d: matrix.n_cols(),
            y,
            c,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn loss(&self, w: &[f64], b: f64) -> f64 {
        let reg: f64 = w.iter().map(|v| v * v).sum::<f64>() / (2.0 * self.c);
        let data: f64 = (0..self.n())
            .map(|i| {
                let row = &self.design[i * self.d..(i + 1) * self.d];
                let f: f64 = row.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() + b;
                softplus(-self.y[i] * f)
            })
            .sum();
        reg + data
    }

    /// Analytic gradient (∂/∂w, ∂/∂b).
    pub fn grad(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let mut gw: Vec<f64> = w.iter().map(|v| v / self.c).collect();
        let mut gb = 0.0;
        for i in 0..self.n() {
            let row = &self.design[i * self.d..(i + 1) * self.d];
            let f: f64 = row.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() + b;
            let coeff = -self.y[i] * sigmoid(-self.y[i] * f);
            for (g, x) in gw.iter_mut().zip(row) {
                *g += coeff * x;
            }
            gb += coeff;
        }
        (gw, gb)
    }
}

/// Trains binary logistic regression. Labels must be two-class; the loss is
/// the binary logistic deviance, so multiclass input is rejected.
pub fn train_logistic_regression(
    matrix: &FeatureMatrix,
    params: &LinearParams,
    train_seed: u64,
) -> Result<TrainedModel> {
    params.validate()?;
    require_rows(matrix)?;
    let scaler = Scaler::fit(matrix);
    let objective = LogisticObjective::from_matrix(matrix, &scaler, params.c)?;

    let d = objective.d;
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut loss = objective.loss(&w, b);
    if !loss.is_finite() {
        return Err(Error::input("non-finite loss at initialization"));
    }

    let mut iterations_run = 0;
    for _ in 0..params.max_iterations {
        let (gw, gb) = objective.grad(&w, b);
        let max_norm = gw
            .iter()
            .chain(std::iter::once(&gb))
            .fold(0.0f64, |m, g| m.max(g.abs()));
        if max_norm <= params.tolerance {
            break;
        }
        iterations_run += 1;

        // Backtracking line search (Armijo, halving steps).
        let grad_sq: f64 = gw.iter().map(|g| g * g).sum::<f64>() + gb * gb;
        let mut step = 1.0;
        loop {
            let w_new: Vec<f64> = w.iter().zip(&gw).map(|(wi, gi)| wi - step * gi).collect();
            let b_new = b - step * gb;
            let loss_new = objective.loss(&w_new, b_new);
            if loss_new.is_finite() && loss_new <= loss - 1e-4 * step * grad_sq {
                w = w_new;
                b = b_new;
                loss = loss_new;
                break;
            }
            step *= 0.5;
            if step < 1e-14 {
                break;
            }
        }
        if !loss.is_finite() {
            return Err(Error::input("non-finite loss during optimization"));
        }
    }

    let mut hyperparameters = std::collections::BTreeMap::new();
    hyperparameters.insert("c".into(), format!("{}", params.c));
    hyperparameters.insert("max_iterations".into(), params.max_iterations.to_string());
    hyperparameters.insert("tolerance".into(), format!("{}", params.tolerance));
    hyperparameters.insert("iterations_run".into(), iterations_run.to_string());

    Ok(TrainedModel {
        kind: ModelKind::LogisticRegression,
        hyperparameters,
        schema: FeatureSchema::of(matrix),
        params: LearnedParams::Linear {
            weights: w,
            bias: b,
            scaler,
        },
        meta: TrainingMeta {
            seed: train_seed,
            dataset_fingerprint: 0,
            trained_at: 0,
            task: None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::super::LearnedParams;
    use super::*;
    use crate::matrix::ColumnKind;
    use rand::Rng;

    fn params() -> LinearParams {
        LinearParams {
            c: 10.0,
            max_iterations: 500,
            tolerance: 1e-6,
        }
    }

    fn binary_matrix(values: Vec<f64>, labels: Vec<usize>, d: usize) -> FeatureMatrix {
        FeatureMatrix::new(
            (0..d).map(|i| format!("f{i}")).collect(),
            vec![ColumnKind::Numeric; d],
            values,
            labels,
            vec!["0".into(), "1".into()],
        )
        .unwrap()
    }

    #[test]
    fn separated_points_get_the_right_weight_sign() {
        let m = binary_matrix(vec![-1.0, -0.9, -1.1, 1.0, 0.9, 1.1], vec![0, 0, 0, 1, 1, 1], 1);
        let model = train_logistic_regression(&m, &params(), 1).unwrap();
        let LearnedParams::Linear { weights, .. } = &model.params else {
            unreachable!()
        };
        assert!(weights[0] > 0.0);
        assert_eq!(model.predict(&m).unwrap(), m.labels);
    }

    #[test]
    fn multiclass_input_is_rejected() {
        let m = FeatureMatrix::new(
            vec!["x".into()],
            vec![ColumnKind::Numeric],
            vec![0.0, 1.0, 2.0],
            vec![0, 1, 2],
            vec!["0".into(), "1".into(), "2".into()],
        )
        .unwrap();
        let err = train_logistic_regression(&m, &params(), 1).unwrap_err().to_string();
        assert!(err.contains("binary"));
    }

    #[test]
    fn c_is_echoed_in_metadata() {
        let m = binary_matrix(vec![-1.0, 1.0, -2.0, 2.0], vec![0, 1, 0, 1], 1);
        let model = train_logistic_regression(&m, &params(), 1).unwrap();
        assert_eq!(model.hyperparameters["c"], "10");
    }

    #[test]
    fn importance_is_undefined_for_linear_models() {
        let m = binary_matrix(vec![-1.0, 1.0, -2.0, 2.0], vec![0, 1, 0, 1], 1);
        let model = train_logistic_regression(&m, &params(), 1).unwrap();
        let err = model.feature_importance().unwrap_err().to_string();
        assert!(err.contains("tree-ensemble"), "{err}");
    }

    #[test]
    fn analytic_gradient_matches_central_finite_differences() {
        let mut rng = crate::seed::stream(11, &[]);
        let n = 30;
        let d = 4;
        let values: Vec<f64> = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let labels: Vec<usize> = (0..n).map(|_| usize::from(rng.random::<f64>() < 0.5)).collect();
        let m = binary_matrix(values, labels, d);
        let scaler = Scaler::fit(&m);
        let objective = LogisticObjective::from_matrix(&m, &scaler, 10.0).unwrap();

        let h = 1e-6;
        for _ in 0..20 {
            let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: f64 = rng.random_range(-1.0..1.0);
            let (gw, gb) = objective.grad(&w, b);
            for j in 0..d {
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[j] += h;
                wm[j] -= h;
                let fd = (objective.loss(&wp, b) - objective.loss(&wm, b)) / (2.0 * h);
                let rel = (gw[j] - fd).abs() / gw[j].abs().max(fd.abs()).max(1e-8);
                assert!(rel <= 1e-5, "∂w[{j}]: analytic {} vs fd {fd}", gw[j]);
            }
            let fd = (objective.loss(&w, b + h) - objective.loss(&w, b - h)) / (2.0 * h);
            let rel = (gb - fd).abs() / gb.abs().max(fd.abs()).max(1e-8);
            assert!(rel <= 1e-5, "∂b: analytic {gb} vs fd {fd}");
        }
    }
}
