//! RBF-kernel support vector machine trained with sequential minimal
//! optimization (SMO) on the dual.
//!
//! Binary tasks only. Numeric columns are standardized internally; the
//! kernel is evaluated on demand (no n×n Gram matrix is materialized), and
//! inputs larger than `max_gram_rows` are deterministically subsampled with
//! a note in the hyperparameter echo.

use serde::{Deserialize, Serialize};

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::seed;

use super::scaler::Scaler;
use super::{require_rows, FeatureSchema, LearnedParams, ModelKind, TrainedModel, TrainingMeta};

const TAG_SVM: u64 = 0x57A;

/// RBF width: `Scale` resolves to 1/(d · Var(X)) on the standardized design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GammaSpec {
    Scale,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: GammaSpec,
    /// KKT tolerance for the SMO stopping criterion.
    pub tolerance: f64,
    /// Safety cap on SMO sweeps over the data.
    pub max_passes: usize,
    /// Inputs with more rows are subsampled to this size.
    pub max_gram_rows: usize,
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(Error::config("c", "must be > 0"));
        }
        if let GammaSpec::Fixed(g) = self.gamma {
            if !(g > 0.0) {
                return Err(Error::config("gamma", "must be > 0"));
            }
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::config("tolerance", "must be > 0"));
        }
        if self.max_passes == 0 {
            return Err(Error::config("max_passes", "must be ≥ 1"));
        }
        if self.max_gram_rows < 2 {
            return Err(Error::config("max_gram_rows", "must be ≥ 2"));
        }
        Ok(())
    }
}

/// Post-training facts about the SMO run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoDiagnostics {
    pub converged: bool,
    pub sweeps: usize,
    /// Largest KKT violation over all training points at exit.
    pub kkt_max_violation: f64,
    pub support_vectors: usize,
}

struct Smo<'a> {
    design: &'a [f64],
    d: usize,
    y: &'a [f64],
    c: f64,
    gamma: f64,
    tol: f64,
    alpha: Vec<f64>,
    bias: f64,
    errors: Vec<f64>,
}

impl<'a> Smo<'a> {
    fn n(&self) -> usize {
        self.y.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.design[i * self.d..(i + 1) * self.d]
    }

    fn kernel(&self, i: usize, j: usize) -> f64 {
        let dist2: f64 = self
            .row(i)
            .iter()
            .zip(self.row(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        (-self.gamma * dist2).exp()
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let (a1_old, a2_old) = (self.alpha[i1], self.alpha[i2]);
        let (y1, y2) = (self.y[i1], self.y[i2]);
        let (e1, e2) = (self.errors[i1], self.errors[i2]);
        let s = y1 * y2;

        let (lo, hi) = if s < 0.0 {
            ((a2_old - a1_old).max(0.0), (self.c + a2_old - a1_old).min(self.c))
        } else {
            ((a1_old + a2_old - self.c).max(0.0), (a1_old + a2_old).min(self.c))
        };
        if lo >= hi {
            return false;
        }

        let k11 = self.kernel(i1, i1);
        let k12 = self.kernel(i1, i2);
        let k22 = self.kernel(i2, i2);
        let eta = 2.0 * k12 - k11 - k22;
        if eta >= 0.0 {
            return false;
        }

        let mut a2 = (a2_old - y2 * (e1 - e2) / eta).clamp(lo, hi);
        if (a2 - a2_old).abs() < 1e-10 * (a2 + a2_old + 1e-10) {
            return false;
        }
        let mut a1 = a1_old + s * (a2_old - a2);
        if a1 < 0.0 {
            a2 += s * a1;
            a1 = 0.0;
        } else if a1 > self.c {
            a2 += s * (a1 - self.c);
            a1 = self.c;
        }

        let d1 = y1 * (a1 - a1_old);
        let d2 = y2 * (a2 - a2_old);
        let b1 = self.bias - e1 - d1 * k11 - d2 * k12;
        let b2 = self.bias - e2 - d1 * k12 - d2 * k22;
        let new_bias = if a1 > 0.0 && a1 < self.c {
            b1
        } else if a2 > 0.0 && a2 < self.c {
            b2
        } else {
            (b1 + b2) / 2.0
        };
        let db = new_bias - self.bias;

        for k in 0..self.n() {
            self.errors[k] += d1 * self.kernel(i1, k) + d2 * self.kernel(i2, k) + db;
        }
        self.alpha[i1] = a1;
        self.alpha[i2] = a2;
        self.bias = new_bias;
        true
    }

    fn violates_kkt(&self, i: usize) -> bool {
        let r = self.errors[i] * self.y[i];
        (r < -self.tol && self.alpha[i] < self.c) || (r > self.tol && self.alpha[i] > 0.0)
    }

    fn examine(&mut self, i2: usize) -> bool {
        if !self.violates_kkt(i2) {
            return false;
        }
        // Second-choice heuristic: the largest |E1 − E2| among non-bound
        // points, lowest index on ties; then every non-bound point; then
        // every point. Deterministic order keeps training reproducible.
        let e2 = self.errors[i2];
        let mut best: Option<(f64, usize)> = None;
        for i in 0..self.n() {
            if self.alpha[i] > 0.0 && self.alpha[i] < self.c {
                let gap = (self.errors[i] - e2).abs();
                if best.map_or(true, |(g, _)| gap > g) {
                    best = Some((gap, i));
                }
            }
        }
        if let Some((_, i1)) = best {
            if self.take_step(i1, i2) {
                return true;
            }
        }
        for i1 in 0..self.n() {
            if self.alpha[i1] > 0.0 && self.alpha[i1] < self.c && self.take_step(i1, i2) {
                return true;
            }
        }
        for i1 in 0..self.n() {
            if self.take_step(i1, i2) {
                return true;
            }
        }
        false
    }

    fn solve(&mut self, max_sweeps: usize) -> (bool, usize) {
        let mut examine_all = true;
        let mut sweeps = 0;
        while sweeps < max_sweeps {
            sweeps += 1;
            let mut changed = 0usize;
            if examine_all {
                for i in 0..self.n() {
                    changed += usize::from(self.examine(i));
                }
                if changed == 0 {
                    return (true, sweeps);
                }
                examine_all = false;
            } else {
                for i in 0..self.n() {
                    if self.alpha[i] > 0.0 && self.alpha[i] < self.c {
                        changed += usize::from(self.examine(i));
                    }
                }
                if changed == 0 {
                    examine_all = true;
                }
            }
        }
        (false, sweeps)
    }

    fn kkt_max_violation(&self) -> f64 {
        (0..self.n())
            .map(|i| {
                let r = self.errors[i] * self.y[i];
                if self.alpha[i] <= 0.0 {
                    (-r).max(0.0) // need y·f ≥ 1 ⇔ r ≥ 0
                } else if self.alpha[i] >= self.c {
                    r.max(0.0) // need y·f ≤ 1 ⇔ r ≤ 0
                } else {
                    r.abs() // need y·f = 1
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Trains a binary RBF SVM and reports SMO diagnostics.
pub fn train_svm_rbf_with_diagnostics(
    matrix: &FeatureMatrix,
    params: &SvmParams,
    train_seed: u64,
) -> Result<(TrainedModel, SmoDiagnostics)> {
    params.validate()?;
    require_rows(matrix)?;
    if matrix.n_classes() != 2 {
        return Err(Error::input(format!(
            "the RBF SVM is a binary classifier; got {} classes",
            matrix.n_classes()
        )));
    }

    // Deterministic subsample when the dual workspace would be too large.
    let n_input = matrix.n_rows();
    let subsampled = n_input > params.max_gram_rows;
    let working;
    let matrix = if subsampled {
        let mut order: Vec<usize> = (0..n_input).collect();
        let mut rng = seed::stream(train_seed, &[TAG_SVM]);
        for i in 0..params.max_gram_rows {
            let j = rng.random_range(i..n_input);
            order.swap(i, j);
        }
        let mut keep = order[..params.max_gram_rows].to_vec();
        keep.sort_unstable();
        working = matrix.select_rows(&keep);
        &working
    } else {
        matrix
    };

    let scaler = Scaler::fit(matrix);
    let design = scaler.transform(matrix);
    let d = matrix.n_cols();
    let n = matrix.n_rows();
    let y: Vec<f64> = matrix
        .labels
        .iter()
        .map(|&l| if l == 1 { 1.0 } else { -1.0 })
        .collect();

    let gamma = match params.gamma {
        GammaSpec::Fixed(g) => g,
        GammaSpec::Scale => {
            let len = design.len() as f64;
            let mean = design.iter().sum::<f64>() / len;
            let var = design.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / len;
            if var > 0.0 {
                1.0 / (d as f64 * var)
            } else {
                1.0 / d as f64
            }
        }
    };

    let mut smo = Smo {
        design: &design,
        d,
        y: &y,
        c: params.c,
        gamma,
        tol: params.tolerance,
        alpha: vec![0.0; n],
        bias: 0.0,
        errors: y.iter().map(|&yi| -yi).collect(),
    };
    let (converged, sweeps) = smo.solve(params.max_passes);
    let kkt_max_violation = smo.kkt_max_violation();

    let mut support = Vec::new();
    let mut alpha_y = Vec::new();
    for i in 0..n {
        if smo.alpha[i] > 0.0 {
            support.push(smo.row(i).to_vec());
            alpha_y.push(smo.alpha[i] * y[i]);
        }
    }
    let diagnostics = SmoDiagnostics {
        converged,
        sweeps,
        kkt_max_violation,
        support_vectors: support.len(),
    };

    let mut hyperparameters = std::collections::BTreeMap::new();
    hyperparameters.insert("c".into(), format!("{}", params.c));
    hyperparameters.insert("kernel".into(), "rbf".into());
    hyperparameters.insert("gamma".into(), format!("{gamma}"));
    if matches!(params.gamma, GammaSpec::Scale) {
        hyperparameters.insert("gamma_mode".into(), "scale".into());
    }
    hyperparameters.insert("tolerance".into(), format!("{}", params.tolerance));
    hyperparameters.insert("max_passes".into(), params.max_passes.to_string());
    hyperparameters.insert("max_gram_rows".into(), params.max_gram_rows.to_string());
    hyperparameters.insert("converged".into(), converged.to_string());
    if subsampled {
        hyperparameters.insert("subsampled_from".into(), n_input.to_string());
        hyperparameters.insert("training_rows_used".into(), n.to_string());
    }

    let bias = smo.bias;
    Ok((
        TrainedModel {
            kind: ModelKind::SvmRbf,
            hyperparameters,
            schema: FeatureSchema::of(matrix),
            params: LearnedParams::Svm {
                support,
                alpha_y,
                bias,
                gamma,
                scaler,
            },
            meta: TrainingMeta {
                seed: train_seed,
                dataset_fingerprint: 0,
                trained_at: 0,
                task: None,
            },
        },
        diagnostics,
    ))
}

/// Trains a binary RBF SVM.
pub fn train_svm_rbf(matrix: &FeatureMatrix, params: &SvmParams, train_seed: u64) -> Result<TrainedModel> {
    train_svm_rbf_with_diagnostics(matrix, params, train_seed).map(|(model, _)| model)
}

#[cfg(test)]
mod tests {
    use super::super::LearnedParams;
    use super::*;
    use crate::matrix::ColumnKind;
    use rand::Rng;

    fn params() -> SvmParams {
        SvmParams {
            c: 10.0,
            gamma: GammaSpec::Scale,
            tolerance: 1e-3,
            max_passes: 100,
            max_gram_rows: 20_000,
        }
    }

    fn blobs(n_per_class: usize, separation: f64, seed: u64) -> FeatureMatrix {
        let mut rng = crate::seed::stream(seed, &[]);
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for class in 0..2usize {
            let center = if class == 0 { -separation } else { separation };
            for _ in 0..n_per_class {
                values.push(center + rng.random_range(-0.5..0.5));
                values.push(center + rng.random_range(-0.5..0.5));
                labels.push(class);
            }
        }
        FeatureMatrix::new(
            vec!["x".into(), "y".into()],
            vec![ColumnKind::Numeric; 2],
            values,
            labels,
            vec!["0".into(), "1".into()],
        )
        .unwrap()
    }

    #[test]
    fn separable_blobs_are_fit_perfectly() {
        let m = blobs(40, 2.0, 5);
        let (model, diag) = train_svm_rbf_with_diagnostics(&m, &params(), 5).unwrap();
        assert!(diag.converged);
        assert_eq!(model.predict(&m).unwrap(), m.labels);
    }

    #[test]
    fn alphas_respect_the_box_and_kkt_holds_at_exit() {
        let m = blobs(30, 1.0, 6);
        let p = params();
        let (model, diag) = train_svm_rbf_with_diagnostics(&m, &p, 6).unwrap();
        assert!(diag.converged);
        assert!(diag.kkt_max_violation <= p.tolerance, "kkt {}", diag.kkt_max_violation);
        let LearnedParams::Svm { alpha_y, .. } = &model.params else {
            unreachable!()
        };
        for ay in alpha_y {
            assert!(ay.abs() > 0.0 && ay.abs() <= p.c + 1e-12);
        }
    }

    #[test]
    fn contradictory_duplicate_points_do_not_wedge_training() {
        let m = FeatureMatrix::new(
            vec!["x".into()],
            vec![ColumnKind::Numeric],
            vec![0.0, 0.0, -1.0, 1.0],
            vec![0, 1, 0, 1],
            vec!["0".into(), "1".into()],
        )
        .unwrap();
        let model = train_svm_rbf(&m, &params(), 7).unwrap();
        let preds = model.predict(&m).unwrap();
        // The duplicate pair shares one prediction, so at most one of the
        // two is right.
        assert_eq!(preds[0], preds[1]);
        let correct = usize::from(preds[0] == 0) + usize::from(preds[1] == 1);
        assert!(correct <= 1);
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
        assert!(train_svm_rbf(&m, &params(), 7).is_err());
    }

    #[test]
    fn oversized_inputs_are_deterministically_subsampled() {
        let m = blobs(60, 2.0, 8);
        let mut p = params();
        p.max_gram_rows = 50;
        let a = train_svm_rbf(&m, &p, 8).unwrap();
        let b = train_svm_rbf(&m, &p, 8).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hyperparameters["subsampled_from"], "120");
        assert_eq!(a.hyperparameters["training_rows_used"], "50");
    }
}
