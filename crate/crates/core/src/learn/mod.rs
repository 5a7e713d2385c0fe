//! From-scratch supervised learners: a Gini CART base, random forests,
//! multinomial gradient boosting, L2 logistic regression, and an RBF-kernel
//! SVM trained with SMO, plus stratified k-fold grid search.
//!
//! Every trainer is deterministic for a fixed seed regardless of thread
//! count, predictions are pure functions of (learned parameters, input row),
//! and a serialized model reproduces its predictions bit-exactly after
//! reload.

pub mod boost;
pub mod cart;
pub mod forest;
pub mod grid;
pub mod linear;
pub mod reference;
pub mod scaler;
pub mod svm;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use boost::train_gradient_boosting;
pub use cart::{CartParams, FeatureSubsample, Impurity, Tree};
pub use forest::train_random_forest;
pub use grid::{
    fold_train_seed, grid_search, grid_search_and_train, stratified_kfold, GridPoint,
    GridSearchResult, GridSearchSpec, Scoring,
};
pub use linear::{train_logistic_regression, LinearParams, LogisticObjective};
pub use scaler::Scaler;
pub use svm::{train_svm_rbf, GammaSpec, SvmParams};

use crate::error::{Error, Result};
use crate::matrix::{ColumnKind, FeatureMatrix};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    Cart,
    RandomForest,
    GradientBoosting,
    LogisticRegression,
    SvmRbf,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Cart => "cart",
            ModelKind::RandomForest => "random_forest",
            ModelKind::GradientBoosting => "gradient_boosting",
            ModelKind::LogisticRegression => "logistic_regression",
            ModelKind::SvmRbf => "svm_rbf",
        }
    }
}

/// Feature schema frozen into a trained model: predictions require an input
/// matrix with exactly these columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub column_names: Vec<String>,
    pub column_kinds: Vec<ColumnKind>,
    pub class_names: Vec<String>,
}

impl FeatureSchema {
    pub fn of(matrix: &FeatureMatrix) -> FeatureSchema {
        FeatureSchema {
            column_names: matrix.column_names.clone(),
            column_kinds: matrix.column_kinds.clone(),
            class_names: matrix.class_names.clone(),
        }
    }

    /// Errors with the first mismatched column name if `matrix` does not
    /// carry this schema.
    pub fn check(&self, matrix: &FeatureMatrix) -> Result<()> {
        for (i, expected) in self.column_names.iter().enumerate() {
            match matrix.column_names.get(i) {
                Some(found) if found == expected => {}
                Some(found) => {
                    return Err(Error::SchemaMismatch(format!(
                        "column {i}: expected {expected:?}, found {found:?}"
                    )))
                }
                None => {
                    return Err(Error::SchemaMismatch(format!(
                        "column {i}: expected {expected:?}, but input has only {} columns",
                        matrix.n_cols()
                    )))
                }
            }
        }
        if matrix.n_cols() > self.column_names.len() {
            return Err(Error::SchemaMismatch(format!(
                "input has extra column {:?}",
                matrix.column_names[self.column_names.len()]
            )));
        }
        Ok(())
    }
}

/// Training provenance stored in every model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    /// Fingerprint of the session dataset the features came from; 0 when
    /// the caller did not supply one.
    pub dataset_fingerprint: u64,
    /// Caller-supplied epoch seconds; 0 keeps artifacts reproducible.
    pub trained_at: i64,
    /// Prediction task tag (e.g. `exit-method`), set by the pipeline.
    pub task: Option<String>,
}

/// Learned parameters per model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LearnedParams {
    Tree(Tree),
    Forest {
        trees: Vec<Tree>,
    },
    Boosted {
        init_scores: Vec<f64>,
        learning_rate: f64,
        /// `rounds[m][k]`: iteration m, one regression tree per class k.
        rounds: Vec<Vec<Tree>>,
        /// Training-set multinomial deviance after each iteration.
        train_deviance: Vec<f64>,
    },
    Linear {
        weights: Vec<f64>,
        bias: f64,
        scaler: Scaler,
    },
    Svm {
        support: Vec<Vec<f64>>,
        /// αᵢ·yᵢ per support vector.
        alpha_y: Vec<f64>,
        bias: f64,
        gamma: f64,
        scaler: Scaler,
    },
}

/// A trained, immutable model: hyperparameters, feature schema, learned
/// parameters, and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub hyperparameters: BTreeMap<String, String>,
    pub schema: FeatureSchema,
    pub params: LearnedParams,
    pub meta: TrainingMeta,
}

/// Lowest index wins ties, so predictions are reproducible across platforms.
pub fn argmax_low(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn softmax_into(scores: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
    }
}

impl TrainedModel {
    pub fn n_classes(&self) -> usize {
        self.schema.class_names.len()
    }

    pub fn with_provenance(mut self, dataset_fingerprint: u64, trained_at: i64, task: Option<String>) -> Self {
        self.meta.dataset_fingerprint = dataset_fingerprint;
        self.meta.trained_at = trained_at;
        self.meta.task = task;
        self
    }

    fn proba_row(&self, row: &[f64], scratch: &mut Vec<f64>) -> Vec<f64> {
        match &self.params {
            LearnedParams::Tree(tree) => tree.leaf_value(row).to_vec(),
            LearnedParams::Forest { trees } => {
                let k = self.n_classes();
                let mut probs = vec![0.0; k];
                for tree in trees {
                    for (p, v) in probs.iter_mut().zip(tree.leaf_value(row)) {
                        *p += v;
                    }
                }
                let t = trees.len() as f64;
                probs.iter_mut().for_each(|p| *p /= t);
                probs
            }
            LearnedParams::Boosted {
                init_scores,
                learning_rate,
                rounds,
                ..
            } => {
                let mut scores = init_scores.clone();
                for round in rounds {
                    for (k, tree) in round.iter().enumerate() {
                        scores[k] += learning_rate * tree.leaf_value(row)[0];
                    }
                }
                softmax_into(&mut scores);
                scores
            }
            LearnedParams::Linear { weights, bias, scaler } => {
                scaler.transform_row(row, scratch);
                let f: f64 = weights.iter().zip(scratch.iter()).map(|(w, x)| w * x).sum::<f64>() + bias;
                let p1 = 1.0 / (1.0 + (-f).exp());
                vec![1.0 - p1, p1]
            }
            LearnedParams::Svm {
                support,
                alpha_y,
                bias,
                gamma,
                scaler,
            } => {
                scaler.transform_row(row, scratch);
                let mut f = *bias;
                for (sv, ay) in support.iter().zip(alpha_y) {
                    let dist2: f64 = sv
                        .iter()
                        .zip(scratch.iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    f += ay * (-gamma * dist2).exp();
                }
                // The SMO dual carries no calibrated probabilities; the
                // decision is emitted as a degenerate distribution.
                if f > 0.0 {
                    vec![0.0, 1.0]
                } else {
                    vec![1.0, 0.0]
                }
            }
        }
    }

    /// Per-row class probability vectors; rows sum to 1 within 1e-9.
    pub fn predict_proba(&self, matrix: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
        self.schema.check(matrix)?;
        let mut scratch = Vec::new();
        Ok((0..matrix.n_rows())
            .map(|i| self.proba_row(matrix.row(i), &mut scratch))
            .collect())
    }

    /// Predicted class indices (argmax of probabilities, lowest index wins).
    pub fn predict(&self, matrix: &FeatureMatrix) -> Result<Vec<usize>> {
        Ok(self.predict_proba(matrix)?.iter().map(|p| argmax_low(p)).collect())
    }

    /// Mean-decrease-in-impurity importance, one-hot groups re-aggregated
    /// to their parent feature, normalized to sum to 1, sorted descending.
    /// Defined for tree ensembles only.
    pub fn feature_importance(&self) -> Result<Vec<(String, f64)>> {
        let trees: Vec<&Tree> = match &self.params {
            LearnedParams::Tree(tree) => vec![tree],
            LearnedParams::Forest { trees } => trees.iter().collect(),
            LearnedParams::Boosted { rounds, .. } => rounds.iter().flatten().collect(),
            LearnedParams::Linear { .. } | LearnedParams::Svm { .. } => {
                return Err(Error::input(
                    "feature importance is defined for tree-ensemble models only",
                ))
            }
        };
        let d = self.schema.column_names.len();
        let mut mean = vec![0.0; d];
        for tree in &trees {
            for (m, v) in mean.iter_mut().zip(&tree.importance) {
                *m += v;
            }
        }
        let t = trees.len() as f64;
        mean.iter_mut().for_each(|m| *m /= t);

        // Re-aggregate one-hot groups to the parent feature, preserving
        // first-appearance order so equal importances sort deterministically.
        let mut order: Vec<String> = Vec::new();
        let mut totals: BTreeMap<String, f64> = BTreeMap::new();
        for (name, value) in self.schema.column_names.iter().zip(&mean) {
            let parent = name.split('=').next().unwrap().to_string();
            if !totals.contains_key(&parent) {
                order.push(parent.clone());
            }
            *totals.entry(parent).or_insert(0.0) += value;
        }
        let total: f64 = totals.values().sum();
        let mut out: Vec<(String, f64)> = order
            .into_iter()
            .map(|name| {
                let v = totals[&name];
                (name, if total > 0.0 { v / total } else { 0.0 })
            })
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1));
        Ok(out)
    }
}

/// Free-function forms of the prediction operations.
pub fn predict(model: &TrainedModel, matrix: &FeatureMatrix) -> Result<Vec<usize>> {
    model.predict(matrix)
}

pub fn predict_proba(model: &TrainedModel, matrix: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
    model.predict_proba(matrix)
}

pub fn feature_importance(model: &TrainedModel) -> Result<Vec<(String, f64)>> {
    model.feature_importance()
}

/// Ensemble hyperparameters shared by random forests and gradient boosting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub n_estimators: usize,
    /// Shrinkage; used by gradient boosting only.
    pub learning_rate: f64,
    pub base: CartParams,
    /// Bootstrap resampling; used by random forests only.
    pub bootstrap: bool,
    pub seed: u64,
}

impl EnsembleParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators < 1 {
            return Err(Error::config("n_estimators", "must be ≥ 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate", "must be > 0"));
        }
        self.base.validate()
    }
}

fn require_rows(matrix: &FeatureMatrix) -> Result<()> {
    if matrix.n_rows() == 0 {
        return Err(Error::input("cannot train on an empty matrix"));
    }
    Ok(())
}

fn echo_cart(params: &CartParams, map: &mut BTreeMap<String, String>) {
    map.insert("max_depth".into(), params.max_depth.to_string());
    map.insert("min_samples_split".into(), params.min_samples_split.to_string());
    map.insert("min_samples_leaf".into(), params.min_samples_leaf.to_string());
    map.insert("impurity".into(), "gini".into());
    map.insert(
        "feature_subsample".into(),
        match params.feature_subsample {
            FeatureSubsample::All => "all".into(),
            FeatureSubsample::Sqrt => "sqrt".into(),
        },
    );
}

/// Trains a single Gini classification tree.
pub fn train_cart(matrix: &FeatureMatrix, params: &CartParams, train_seed: u64) -> Result<TrainedModel> {
    params.validate()?;
    require_rows(matrix)?;
    let rows: Vec<u32> = (0..matrix.n_rows() as u32).collect();
    let mut rng = seed::stream(train_seed, &[0xCA27]);
    let tree = cart::grow_classification_tree(
        matrix,
        &rows,
        params,
        match params.feature_subsample {
            FeatureSubsample::All => None,
            FeatureSubsample::Sqrt => Some(&mut rng),
        },
    );
    let mut hyperparameters = BTreeMap::new();
    echo_cart(params, &mut hyperparameters);
    Ok(TrainedModel {
        kind: ModelKind::Cart,
        hyperparameters,
        schema: FeatureSchema::of(matrix),
        params: LearnedParams::Tree(tree),
        meta: TrainingMeta {
            seed: train_seed,
            dataset_fingerprint: 0,
            trained_at: 0,
            task: None,
        },
    })
}

/// Model family plus its hyperparameters; the unit grid search iterates
/// over and the pipeline trains from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelSpec {
    Cart(CartParams),
    RandomForest(EnsembleParams),
    GradientBoosting(EnsembleParams),
    LogisticRegression(LinearParams),
    SvmRbf(SvmParams),
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Cart(_) => ModelKind::Cart,
            ModelSpec::RandomForest(_) => ModelKind::RandomForest,
            ModelSpec::GradientBoosting(_) => ModelKind::GradientBoosting,
            ModelSpec::LogisticRegression(_) => ModelKind::LogisticRegression,
            ModelSpec::SvmRbf(_) => ModelKind::SvmRbf,
        }
    }

    /// Published default configuration per family: the forest and boosting
    /// defaults are the reported best parameters (depth 10 / leaf 2 /
    /// split 5 / 100 trees, and rate 0.1 / depth 3 / 100 rounds), C = 10
    /// for the linear and kernel models.
    pub fn default_for(kind: ModelKind, train_seed: u64) -> ModelSpec {
        match kind {
            ModelKind::Cart => ModelSpec::Cart(CartParams::default()),
            ModelKind::RandomForest => ModelSpec::RandomForest(EnsembleParams {
                n_estimators: 100,
                learning_rate: 0.1,
                base: CartParams {
                    max_depth: 10,
                    min_samples_split: 5,
                    min_samples_leaf: 2,
                    impurity: Impurity::Gini,
                    feature_subsample: FeatureSubsample::Sqrt,
                },
                bootstrap: true,
                seed: train_seed,
            }),
            ModelKind::GradientBoosting => ModelSpec::GradientBoosting(EnsembleParams {
                n_estimators: 100,
                learning_rate: 0.1,
                base: CartParams {
                    max_depth: 3,
                    min_samples_split: 2,
                    min_samples_leaf: 1,
                    impurity: Impurity::Gini,
                    feature_subsample: FeatureSubsample::All,
                },
                bootstrap: false,
                seed: train_seed,
            }),
            ModelKind::LogisticRegression => ModelSpec::LogisticRegression(LinearParams {
                c: 10.0,
                max_iterations: 500,
                tolerance: 1e-6,
            }),
            ModelKind::SvmRbf => ModelSpec::SvmRbf(SvmParams {
                c: 10.0,
                gamma: GammaSpec::Scale,
                tolerance: 1e-3,
                max_passes: 100,
                max_gram_rows: 20_000,
            }),
        }
    }

    /// Trains with the given seed (overriding any seed stored in ensemble
    /// params), so fold evaluations control randomness exactly.
    pub fn train(&self, matrix: &FeatureMatrix, train_seed: u64) -> Result<TrainedModel> {
        match self {
            ModelSpec::Cart(p) => train_cart(matrix, p, train_seed),
            ModelSpec::RandomForest(p) => {
                let mut p = p.clone();
                p.seed = train_seed;
                train_random_forest(matrix, &p)
            }
            ModelSpec::GradientBoosting(p) => {
                let mut p = p.clone();
                p.seed = train_seed;
                train_gradient_boosting(matrix, &p)
            }
            ModelSpec::LogisticRegression(p) => train_logistic_regression(matrix, p, train_seed),
            ModelSpec::SvmRbf(p) => train_svm_rbf(matrix, p, train_seed),
        }
    }

    /// Returns a copy with one named hyperparameter replaced; grid axes use
    /// these names (`n_estimators`, `max_depth`, `min_samples_split`,
    /// `min_samples_leaf`, `learning_rate`, `c`).
    pub fn with_param(&self, name: &str, value: f64) -> Result<ModelSpec> {
        let as_usize = |v: f64| -> Result<usize> {
            if v.fract() != 0.0 || v < 0.0 {
                return Err(Error::config(name, format!("{v} is not a non-negative integer")));
            }
            Ok(v as usize)
        };
        let mut spec = self.clone();
        let known = match &mut spec {
            ModelSpec::Cart(p) => match name {
                "max_depth" => {
                    p.max_depth = as_usize(value)?;
                    true
                }
                "min_samples_split" => {
                    p.min_samples_split = as_usize(value)?;
                    true
                }
                "min_samples_leaf" => {
                    p.min_samples_leaf = as_usize(value)?;
                    true
                }
                _ => false,
            },
            ModelSpec::RandomForest(p) | ModelSpec::GradientBoosting(p) => match name {
                "n_estimators" => {
                    p.n_estimators = as_usize(value)?;
                    true
                }
                "learning_rate" => {
                    p.learning_rate = value;
                    true
                }
                "max_depth" => {
                    p.base.max_depth = as_usize(value)?;
                    true
                }
                "min_samples_split" => {
                    p.base.min_samples_split = as_usize(value)?;
                    true
                }
                "min_samples_leaf" => {
                    p.base.min_samples_leaf = as_usize(value)?;
                    true
                }
                _ => false,
            },
            ModelSpec::LogisticRegression(p) => match name {
                "c" => {
                    p.c = value;
                    true
                }
                "max_iterations" => {
                    p.max_iterations = as_usize(value)?;
                    true
                }
                "tolerance" => {
                    p.tolerance = value;
                    true
                }
                _ => false,
            },
            ModelSpec::SvmRbf(p) => match name {
                "c" => {
                    p.c = value;
                    true
                }
                "gamma" => {
                    p.gamma = GammaSpec::Fixed(value);
                    true
                }
                "tolerance" => {
                    p.tolerance = value;
                    true
                }
                "max_passes" => {
                    p.max_passes = as_usize(value)?;
                    true
                }
                _ => false,
            },
        };
        if !known {
            return Err(Error::config(
                name,
                format!("not a hyperparameter of {}", self.kind().as_str()),
            ));
        }
        Ok(spec)
    }

    /// Grid tie-break key: fewer estimators, then shallower depth, then
    /// lower C. Families without a given knob contribute 0 for it.
    pub fn tiebreak_key(&self) -> (usize, usize, f64) {
        match self {
            ModelSpec::Cart(p) => (0, p.max_depth, 0.0),
            ModelSpec::RandomForest(p) | ModelSpec::GradientBoosting(p) => {
                (p.n_estimators, p.base.max_depth, 0.0)
            }
            ModelSpec::LogisticRegression(p) => (0, 0, p.c),
            ModelSpec::SvmRbf(p) => (0, 0, p.c),
        }
    }
}

impl TrainedModel {
    /// Reconstructs the model's hyperparameter spec from the echo stored in
    /// the file, so a model can be retrained (e.g. on a fresh split) with
    /// exactly its recorded configuration.
    pub fn spec(&self) -> Result<ModelSpec> {
        let get = |key: &str| -> Result<&String> {
            self.hyperparameters
                .get(key)
                .ok_or_else(|| Error::ModelFormat(format!("hyperparameter {key:?} missing")))
        };
        let parse_usize = |key: &str| -> Result<usize> {
            get(key)?
                .parse()
                .map_err(|_| Error::ModelFormat(format!("hyperparameter {key:?} is not an integer")))
        };
        let parse_f64 = |key: &str| -> Result<f64> {
            get(key)?
                .parse()
                .map_err(|_| Error::ModelFormat(format!("hyperparameter {key:?} is not a number")))
        };
        let cart = || -> Result<CartParams> {
            Ok(CartParams {
                max_depth: parse_usize("max_depth")?,
                min_samples_split: parse_usize("min_samples_split")?,
                min_samples_leaf: parse_usize("min_samples_leaf")?,
                impurity: Impurity::Gini,
                feature_subsample: match get("feature_subsample")?.as_str() {
                    "sqrt" => FeatureSubsample::Sqrt,
                    _ => FeatureSubsample::All,
                },
            })
        };
        Ok(match self.kind {
            ModelKind::Cart => ModelSpec::Cart(cart()?),
            ModelKind::RandomForest => ModelSpec::RandomForest(EnsembleParams {
                n_estimators: parse_usize("n_estimators")?,
                learning_rate: 0.1,
                base: cart()?,
                bootstrap: get("bootstrap")? == "true",
                seed: self.meta.seed,
            }),
            ModelKind::GradientBoosting => ModelSpec::GradientBoosting(EnsembleParams {
                n_estimators: parse_usize("n_estimators")?,
                learning_rate: parse_f64("learning_rate")?,
                base: cart()?,
                bootstrap: false,
                seed: self.meta.seed,
            }),
            ModelKind::LogisticRegression => ModelSpec::LogisticRegression(LinearParams {
                c: parse_f64("c")?,
                max_iterations: parse_usize("max_iterations")?,
                tolerance: parse_f64("tolerance")?,
            }),
            ModelKind::SvmRbf => ModelSpec::SvmRbf(SvmParams {
                c: parse_f64("c")?,
                gamma: if self.hyperparameters.contains_key("gamma_mode") {
                    GammaSpec::Scale
                } else {
                    GammaSpec::Fixed(parse_f64("gamma")?)
                },
                tolerance: parse_f64("tolerance")?,
                max_passes: parse_usize("max_passes")?,
                max_gram_rows: parse_usize("max_gram_rows")?,
            }),
        })
    }
}

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    model: TrainedModel,
}

/// Serializes a model to the versioned JSON model format. Floats render in
/// shortest round-trip decimal form, so a reloaded model reproduces
/// predictions bit-exactly.
pub fn model_to_json(model: &TrainedModel) -> String {
    serde_json::to_string_pretty(&ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        model: model.clone(),
    })
    .expect("model serialization cannot fail")
}

pub fn model_from_json(text: &str) -> Result<TrainedModel> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported format version {} (expected {MODEL_FORMAT_VERSION})",
            file.format_version
        )));
    }
    Ok(file.model)
}

pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model_to_json(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::ColumnKind;

    pub(crate) fn toy_matrix() -> FeatureMatrix {
        // Two clusters separated on f0, plus one noise column.
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let class = usize::from(i >= 10);
            values.push(if class == 0 { i as f64 * 0.1 } else { 5.0 + i as f64 * 0.1 });
            values.push((i % 3) as f64);
            labels.push(class);
        }
        FeatureMatrix::new(
            vec!["f0".into(), "f1".into()],
            vec![ColumnKind::Numeric; 2],
            values,
            labels,
            vec!["0".into(), "1".into()],
        )
        .unwrap()
    }

    #[test]
    fn cart_trains_and_predicts() {
        let m = toy_matrix();
        let model = train_cart(&m, &CartParams::default(), 7).unwrap();
        assert_eq!(model.predict(&m).unwrap(), m.labels);
        assert_eq!(model.hyperparameters["impurity"], "gini");
    }

    #[test]
    fn empty_matrix_is_rejected() {
        let m = toy_matrix();
        let empty = m.select_rows(&[]);
        assert!(train_cart(&empty, &CartParams::default(), 7).is_err());
    }

    #[test]
    fn predict_checks_the_schema() {
        let m = toy_matrix();
        let model = train_cart(&m, &CartParams::default(), 7).unwrap();
        let mut other = m.clone();
        other.column_names[1] = "f9".into();
        let err = model.predict(&other).unwrap_err().to_string();
        assert!(err.contains("f1") && err.contains("f9"), "{err}");
    }

    #[test]
    fn argmax_breaks_ties_toward_the_lowest_index() {
        assert_eq!(argmax_low(&[0.5, 0.5]), 0);
        assert_eq!(argmax_low(&[0.2, 0.4, 0.4]), 1);
    }

    #[test]
    fn json_round_trip_reproduces_predictions_bit_exactly() {
        let m = toy_matrix();
        let model = train_cart(&m, &CartParams::default(), 7).unwrap();
        let reloaded = model_from_json(&model_to_json(&model)).unwrap();
        assert_eq!(reloaded, model);
        assert_eq!(
            reloaded.predict_proba(&m).unwrap(),
            model.predict_proba(&m).unwrap()
        );
    }

    #[test]
    fn unknown_format_version_is_rejected() {
        let m = toy_matrix();
        let model = train_cart(&m, &CartParams::default(), 7).unwrap();
        let text = model_to_json(&model).replace("\"format_version\": 1", "\"format_version\": 99");
        assert!(matches!(model_from_json(&text), Err(Error::ModelFormat(_))));
    }

    #[test]
    fn importance_of_a_single_split_feature_is_one() {
        let m = toy_matrix();
        let model = train_cart(&m, &CartParams::default(), 7).unwrap();
        let imp = model.feature_importance().unwrap();
        assert_eq!(imp[0].0, "f0");
        assert!((imp[0].1 - 1.0).abs() < 1e-12);
        let total: f64 = imp.iter().map(|(_, v)| v).sum();
        assert!((total - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn spec_round_trips_through_the_hyperparameter_echo() {
        let m = toy_matrix();
        for kind in [
            ModelKind::Cart,
            ModelKind::RandomForest,
            ModelKind::GradientBoosting,
            ModelKind::LogisticRegression,
            ModelKind::SvmRbf,
        ] {
            let mut spec = ModelSpec::default_for(kind, 7);
            if matches!(kind, ModelKind::RandomForest | ModelKind::GradientBoosting) {
                spec = spec.with_param("n_estimators", 4.0).unwrap();
            }
            let model = spec.train(&m, 7).unwrap();
            assert_eq!(model.spec().unwrap(), spec, "{}", kind.as_str());
        }
    }

    #[test]
    fn with_param_rejects_unknown_names() {
        let spec = ModelSpec::default_for(ModelKind::RandomForest, 1);
        assert!(spec.with_param("c", 1.0).is_err());
        let spec = spec.with_param("n_estimators", 5.0).unwrap();
        match spec {
            ModelSpec::RandomForest(p) => assert_eq!(p.n_estimators, 5),
            _ => unreachable!(),
        }
    }
}
