//! Random forest: bagged Gini trees with per-split feature subsampling.

use rand::Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::matrix::FeatureMatrix;
use crate::seed;

use super::cart::{grow_classification_tree, FeatureSubsample};
use super::{echo_cart, require_rows, EnsembleParams, FeatureSchema, LearnedParams, ModelKind, TrainedModel, TrainingMeta};

const TAG_TREE: u64 = 0x7EE;

/// Trains `n_estimators` trees, each on a bootstrap sample (n draws with
/// replacement) with √d feature subsampling per split by default.
/// Prediction averages the trees' leaf probability vectors.
///
/// Per-tree seeds derive from (seed, tree index), so the result does not
/// depend on how tree fits are scheduled across threads.
pub fn train_random_forest(matrix: &FeatureMatrix, params: &EnsembleParams) -> Result<TrainedModel> {
    params.validate()?;
    require_rows(matrix)?;

    let n = matrix.n_rows();
    let trees: Vec<_> = (0..params.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::stream(params.seed, &[TAG_TREE, t as u64]);
            let rows: Vec<u32> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n as u32)).collect()
            } else {
                (0..n as u32).collect()
            };
            grow_classification_tree(
                matrix,
                &rows,
                &params.base,
                match params.base.feature_subsample {
                    FeatureSubsample::All => None,
                    FeatureSubsample::Sqrt => Some(&mut rng),
                },
            )
        })
        .collect();

    let mut hyperparameters = std::collections::BTreeMap::new();
    hyperparameters.insert("n_estimators".into(), params.n_estimators.to_string());
    hyperparameters.insert("bootstrap".into(), params.bootstrap.to_string());
    echo_cart(&params.base, &mut hyperparameters);

    Ok(TrainedModel {
        kind: ModelKind::RandomForest,
        hyperparameters,
        schema: FeatureSchema::of(matrix),
        params: LearnedParams::Forest { trees },
        meta: TrainingMeta {
            seed: params.seed,
            dataset_fingerprint: 0,
            trained_at: 0,
            task: None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::toy_matrix;
    use super::super::{train_cart, CartParams, ModelKind, ModelSpec};
    use super::*;

    fn params(n_estimators: usize, bootstrap: bool, subsample: FeatureSubsample) -> EnsembleParams {
        EnsembleParams {
            n_estimators,
            learning_rate: 0.1,
            base: CartParams {
                feature_subsample: subsample,
                ..CartParams::default()
            },
            bootstrap,
            seed: 9,
        }
    }

    #[test]
    fn degenerate_forest_equals_a_single_cart() {
        let m = toy_matrix();
        let forest = train_random_forest(&m, &params(1, false, FeatureSubsample::All)).unwrap();
        let cart = train_cart(&m, &CartParams::default(), 9).unwrap();
        assert_eq!(
            forest.predict_proba(&m).unwrap(),
            cart.predict_proba(&m).unwrap()
        );
    }

    #[test]
    fn published_forest_configuration_is_echoed() {
        let m = toy_matrix();
        let spec = ModelSpec::default_for(ModelKind::RandomForest, 9);
        let model = spec.train(&m, 9).unwrap();
        assert_eq!(model.hyperparameters["max_depth"], "10");
        assert_eq!(model.hyperparameters["min_samples_leaf"], "2");
        assert_eq!(model.hyperparameters["min_samples_split"], "5");
        assert_eq!(model.hyperparameters["n_estimators"], "100");
    }

    #[test]
    fn forests_are_schedule_independent() {
        let m = toy_matrix();
        let p = params(20, true, FeatureSubsample::Sqrt);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| train_random_forest(&m, &p).unwrap());
        let multi = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| train_random_forest(&m, &p).unwrap());
        assert_eq!(single, multi);
        assert_eq!(single.predict(&m).unwrap(), multi.predict(&m).unwrap());
    }

    #[test]
    fn probability_rows_sum_to_one()  {
        let m = toy_matrix();
        let model = train_random_forest(&m, &params(15, true, FeatureSubsample::Sqrt)).unwrap();
        for row in model.predict_proba(&m).unwrap() {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-9);
        }
    }
}
