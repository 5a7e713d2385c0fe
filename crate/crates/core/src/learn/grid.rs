//! Stratified k-fold cross-validation and exhaustive grid search.
//!
//! Every grid point is scored with the *same* fold partition and the same
//! per-fold training seeds (common random numbers), so the comparison is
//! fair, the reported mean CV score is exactly reproducible by re-running
//! the best combination with the returned folds, and results do not depend
//! on thread scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::seed;

use super::{ModelSpec, TrainedModel};

const TAG_FOLD: u64 = 0xF01D;
const TAG_FOLD_TRAIN: u64 = 0xF17;

/// CV scoring metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scoring {
    Accuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchSpec {
    /// Axes: parameter name → candidate values. The cartesian product is
    /// enumerated with the last axis varying fastest.
    pub grid: Vec<(String, Vec<f64>)>,
    /// Fold count k ≥ 2.
    pub k: usize,
    pub stratified: bool,
    pub scoring: Scoring,
    pub seed: u64,
}

/// One evaluated grid combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub assignments: Vec<(String, f64)>,
    pub fold_scores: Vec<f64>,
    /// Mean fold accuracy — the "average CV score" of the combination.
    pub mean_score: f64,
}

#[derive(Debug, Clone)]
pub struct GridSearchResult {
    pub best_index: usize,
    pub best_spec: ModelSpec,
    pub table: Vec<GridPoint>,
    /// Validation indices per fold; complements are the training rows.
    pub folds: Vec<Vec<usize>>,
}

impl GridSearchResult {
    pub fn best(&self) -> &GridPoint {
        &self.table[self.best_index]
    }
}

/// Seed used to train every grid point on fold `fold`; shared across
/// combinations so they see identical randomness.
pub fn fold_train_seed(master: u64, fold: usize) -> u64 {
    seed::derive(master, &[TAG_FOLD_TRAIN, fold as u64])
}

/// Deterministic k-fold split; stratified mode deals each class's shuffled
/// members round-robin so fold class proportions match the global ones.
/// Returns validation index lists, each sorted ascending.
pub fn stratified_kfold(
    labels: &[usize],
    n_classes: usize,
    k: usize,
    stratified: bool,
    master_seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::config("k", "must be ≥ 2"));
    }
    if labels.len() < k {
        return Err(Error::input(format!(
            "{} rows cannot fill k = {k} folds",
            labels.len()
        )));
    }
    let mut folds = vec![Vec::new(); k];
    let shuffle = |indices: &mut Vec<usize>, stream_tag: u64| {
        use rand::Rng;
        let mut rng = seed::stream(master_seed, &[TAG_FOLD, stream_tag]);
        for i in (1..indices.len()).rev() {
            let j = rng.random_range(0..=i);
            indices.swap(i, j);
        }
    };
    if stratified {
        for class in 0..n_classes {
            let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
            if members.len() < k {
                return Err(Error::input(format!(
                    "class {class} has only {} members; stratified {k}-fold needs ≥ {k} per class — use a smaller k",
                    members.len()
                )));
            }
            shuffle(&mut members, class as u64);
            for (i, idx) in members.into_iter().enumerate() {
                folds[i % k].push(idx);
            }
        }
    } else {
        let mut all: Vec<usize> = (0..labels.len()).collect();
        shuffle(&mut all, u64::MAX);
        for (i, idx) in all.into_iter().enumerate() {
            folds[i % k].push(idx);
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

pub fn accuracy(predictions: &[usize], truth: &[usize]) -> f64 {
    debug_assert_eq!(predictions.len(), truth.len());
    predictions.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

fn enumerate_combos(grid: &[(String, Vec<f64>)]) -> Vec<Vec<(String, f64)>> {
    let mut combos = vec![Vec::new()];
    for (name, values) in grid {
        let mut next = Vec::with_capacity(combos.len() * values.len());
        for combo in &combos {
            for &v in values {
                let mut c = combo.clone();
                c.push((name.clone(), v));
                next.push(c);
            }
        }
        combos = next;
    }
    combos
}

/// Mean fold accuracy of one model spec with the given folds — the same
/// computation grid search performs per combination; exposed so a reported
/// best score can be re-derived independently.
pub fn cross_validate(
    matrix: &FeatureMatrix,
    spec: &ModelSpec,
    folds: &[Vec<usize>],
    master_seed: u64,
) -> Result<Vec<f64>> {
    folds
        .iter()
        .enumerate()
        .map(|(fold_idx, val_idx)| {
            let train_idx: Vec<usize> = {
                let mut in_val = vec![false; matrix.n_rows()];
                for &i in val_idx {
                    in_val[i] = true;
                }
                (0..matrix.n_rows()).filter(|&i| !in_val[i]).collect()
            };
            let train = matrix.select_rows(&train_idx);
            let val = matrix.select_rows(val_idx);
            let model = spec.train(&train, fold_train_seed(master_seed, fold_idx))?;
            Ok(accuracy(&model.predict(&val)?, &val.labels))
        })
        .collect()
}

/// Evaluates every grid combination over the same fold partition; the best
/// is the argmax of mean fold accuracy, ties broken toward fewer
/// estimators, then shallower depth, then lower C, then declaration order.
pub fn grid_search(
    matrix: &FeatureMatrix,
    base: &ModelSpec,
    spec: &GridSearchSpec,
) -> Result<GridSearchResult> {
    if spec.grid.is_empty() || spec.grid.iter().any(|(_, values)| values.is_empty()) {
        return Err(Error::config("grid", "must have at least one axis, none empty"));
    }
    let folds = stratified_kfold(
        &matrix.labels,
        matrix.n_classes(),
        spec.k,
        spec.stratified,
        spec.seed,
    )?;

    let combos = enumerate_combos(&spec.grid);
    let specs: Vec<ModelSpec> = combos
        .iter()
        .map(|combo| {
            combo
                .iter()
                .try_fold(base.clone(), |s, (name, value)| s.with_param(name, *value))
        })
        .collect::<Result<_>>()?;

    let scores: Vec<Vec<f64>> = specs
        .par_iter()
        .map(|model_spec| cross_validate(matrix, model_spec, &folds, spec.seed))
        .collect::<Result<_>>()?;

    let table: Vec<GridPoint> = combos
        .into_iter()
        .zip(&scores)
        .map(|(assignments, fold_scores)| GridPoint {
            assignments,
            fold_scores: fold_scores.clone(),
            mean_score: fold_scores.iter().sum::<f64>() / fold_scores.len() as f64,
        })
        .collect();

    let mut best_index = 0;
    for i in 1..table.len() {
        let challenger = table[i].mean_score;
        let incumbent = table[best_index].mean_score;
        if challenger > incumbent {
            best_index = i;
        } else if challenger == incumbent {
            let (e1, d1, c1) = specs[i].tiebreak_key();
            let (e0, d0, c0) = specs[best_index].tiebreak_key();
            if (e1, d1, c1.total_cmp(&c0)) < (e0, d0, std::cmp::Ordering::Equal) {
                best_index = i;
            }
        }
    }

    Ok(GridSearchResult {
        best_index,
        best_spec: specs[best_index].clone(),
        table,
        folds,
    })
}

/// Convenience: grid search, then retrain the best spec on the full matrix.
pub fn grid_search_and_train(
    matrix: &FeatureMatrix,
    base: &ModelSpec,
    spec: &GridSearchSpec,
) -> Result<(GridSearchResult, TrainedModel)> {
    let result = grid_search(matrix, base, spec)?;
    let model = result.best_spec.train(matrix, spec.seed)?;
    Ok((result, model))
}

#[cfg(test)]
mod tests {
    use super::super::tests::toy_matrix;
    use super::super::{ModelKind, ModelSpec};
    use super::*;

    fn spec(grid: Vec<(&str, Vec<f64>)>) -> GridSearchSpec {
        GridSearchSpec {
            grid: grid.into_iter().map(|(n, v)| (n.to_string(), v)).collect(),
            k: 5,
            stratified: true,
            scoring: Scoring::Accuracy,
            seed: 21,
        }
    }

    #[test]
    fn folds_are_stratified_and_deterministic() {
        let m = toy_matrix();
        let a = stratified_kfold(&m.labels, 2, 5, true, 3).unwrap();
        let b = stratified_kfold(&m.labels, 2, 5, true, 3).unwrap();
        assert_eq!(a, b);
        // 10 members per class, 5 folds → 2 per class per fold.
        for fold in &a {
            assert_eq!(fold.len(), 4);
            let ones = fold.iter().filter(|&&i| m.labels[i] == 1).count();
            assert_eq!(ones, 2);
        }
        // every row appears exactly once
        let mut all: Vec<usize> = a.into_iter().flatten().collect();
        all.sort_unstable();
        assert_eq!(all, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn small_classes_get_a_helpful_error() {
        let labels = vec![0, 0, 0, 0, 0, 1, 1];
        let err = stratified_kfold(&labels, 2, 5, true, 3).unwrap_err().to_string();
        assert!(err.contains("smaller k"), "{err}");
    }

    #[test]
    fn degenerate_grids_and_fold_counts_are_rejected() {
        let m = toy_matrix();
        let base = ModelSpec::default_for(ModelKind::Cart, 21);
        assert!(grid_search(&m, &base, &spec(vec![])).is_err());
        assert!(grid_search(&m, &base, &spec(vec![("max_depth", vec![])])).is_err());
        assert!(stratified_kfold(&m.labels, 2, 1, true, 3).is_err());
    }

    #[test]
    fn single_point_grid_returns_that_point() {
        let m = toy_matrix();
        let base = ModelSpec::default_for(ModelKind::Cart, 21);
        let result = grid_search(&m, &base, &spec(vec![("max_depth", vec![3.0])])).unwrap();
        assert_eq!(result.table.len(), 1);
        assert_eq!(result.best_index, 0);
        let mean = result.best().fold_scores.iter().sum::<f64>() / 5.0;
        assert_eq!(result.best().mean_score, mean);
    }

    #[test]
    fn table_size_is_the_grid_cardinality() {
        let m = toy_matrix();
        let base = ModelSpec::default_for(ModelKind::Cart, 21);
        let result = grid_search(
            &m,
            &base,
            &spec(vec![
                ("max_depth", vec![2.0, 4.0, 6.0]),
                ("min_samples_leaf", vec![1.0, 2.0]),
            ]),
        )
        .unwrap();
        assert_eq!(result.table.len(), 6);
        // last axis fastest
        assert_eq!(result.table[0].assignments[1].1, 1.0);
        assert_eq!(result.table[1].assignments[1].1, 2.0);
        assert_eq!(result.table[1].assignments[0].1, 2.0);
    }

    #[test]
    fn best_score_is_exactly_reproducible_with_the_same_folds() {
        let m = toy_matrix();
        let base = ModelSpec::default_for(ModelKind::Cart, 21);
        let grid_spec = spec(vec![("max_depth", vec![1.0, 2.0, 3.0])]);
        let result = grid_search(&m, &base, &grid_spec).unwrap();
        let re_scores = cross_validate(&m, &result.best_spec, &result.folds, grid_spec.seed).unwrap();
        let re_mean = re_scores.iter().sum::<f64>() / re_scores.len() as f64;
        assert_eq!(result.best().mean_score, re_mean);
        assert_eq!(result.best().fold_scores, re_scores);
    }

    #[test]
    fn ties_prefer_the_simpler_model() {
        let m = toy_matrix();
        // All depths separate this toy set perfectly → identical scores;
        // the shallower tree must win.
        let base = ModelSpec::default_for(ModelKind::Cart, 21);
        let result = grid_search(&m, &base, &spec(vec![("max_depth", vec![9.0, 2.0, 5.0])])).unwrap();
        match result.best_spec {
            ModelSpec::Cart(p) => assert_eq!(p.max_depth, 2),
            _ => unreachable!(),
        }
    }

    #[test]
    fn grid_search_is_schedule_independent() {
        let m = toy_matrix();
        let base = ModelSpec::default_for(ModelKind::RandomForest, 21);
        let grid_spec = spec(vec![("n_estimators", vec![3.0, 5.0])]);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| grid_search(&m, &base, &grid_spec).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.table, b.table);
        assert_eq!(a.best_index, b.best_index);
    }
}
