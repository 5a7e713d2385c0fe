//! Gradient boosting with multinomial deviance: per iteration, one
//! regression tree per class is fit to the softmax residual (one-hot minus
//! predicted probability), with leaf values given by the Newton step for
//! the multinomial loss. Scores start at the log class priors.

use rayon::prelude::*;

use crate::error::Result;
use crate::matrix::FeatureMatrix;
use crate::seed;

use super::cart::{grow_regression_tree, FeatureSubsample, RegressionTargets, Tree};
use super::{echo_cart, require_rows, EnsembleParams, FeatureSchema, LearnedParams, ModelKind, TrainedModel, TrainingMeta};

const TAG_BOOST: u64 = 0xB0057;
const PRIOR_FLOOR: f64 = 1e-12;

fn softmax_rows(scores: &[f64], n: usize, k: usize, probs: &mut [f64]) {
    for i in 0..n {
        let row = &scores[i * k..(i + 1) * k];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (j, &s) in row.iter().enumerate() {
            let e = (s - max).exp();
            probs[i * k + j] = e;
            sum += e;
        }
        for j in 0..k {
            probs[i * k + j] /= sum;
        }
    }
}

/// Trains a multinomial gradient-boosted tree ensemble.
pub fn train_gradient_boosting(matrix: &FeatureMatrix, params: &EnsembleParams) -> Result<TrainedModel> {
    params.validate()?;
    require_rows(matrix)?;

    let n = matrix.n_rows();
    let k = matrix.n_classes();
    let rows: Vec<u32> = (0..n as u32).collect();

    // Initial scores: log class priors, floored so absent classes stay
    // representable.
    let counts = matrix.class_counts();
    let init_scores: Vec<f64> = counts
        .iter()
        .map(|&c| ((c as f64 / n as f64).max(PRIOR_FLOOR)).ln())
        .collect();

    let mut scores: Vec<f64> = Vec::with_capacity(n * k);
    for _ in 0..n {
        scores.extend_from_slice(&init_scores);
    }
    let mut probs = vec![0.0; n * k];
    let leaf_scale = if k > 1 { (k - 1) as f64 / k as f64 } else { 1.0 };

    let mut rounds: Vec<Vec<Tree>> = Vec::with_capacity(params.n_estimators);
    let mut train_deviance = Vec::with_capacity(params.n_estimators);

    for m in 0..params.n_estimators {
        softmax_rows(&scores, n, k, &mut probs);

        // Residuals and curvature per class; class fits are independent
        // within a round, so they may run in parallel.
        let fits: Vec<(Vec<f64>, Vec<f64>)> = (0..k)
            .map(|class| {
                let mut residual = Vec::with_capacity(n);
                let mut weight = Vec::with_capacity(n);
                for i in 0..n {
                    let p = probs[i * k + class];
                    let y = f64::from(matrix.labels[i] == class);
                    residual.push(y - p);
                    weight.push(p * (1.0 - p));
                }
                (residual, weight)
            })
            .collect();

        let round: Vec<Tree> = fits
            .par_iter()
            .enumerate()
            .map(|(class, (residual, weight))| {
                let reg = RegressionTargets {
                    targets: residual,
                    weights: weight,
                    leaf_scale,
                };
                let mut rng = seed::stream(params.seed, &[TAG_BOOST, m as u64, class as u64]);
                grow_regression_tree(
                    matrix,
                    &rows,
                    &params.base,
                    &reg,
                    match params.base.feature_subsample {
                        FeatureSubsample::All => None,
                        FeatureSubsample::Sqrt => Some(&mut rng),
                    },
                )
            })
            .collect();

        for (class, tree) in round.iter().enumerate() {
            for i in 0..n {
                scores[i * k + class] += params.learning_rate * tree.leaf_value(matrix.row(i))[0];
            }
        }
        rounds.push(round);

        softmax_rows(&scores, n, k, &mut probs);
        let deviance = -(0..n)
            .map(|i| probs[i * k + matrix.labels[i]].max(PRIOR_FLOOR).ln())
            .sum::<f64>()
            / n as f64;
        train_deviance.push(deviance);
    }

    let mut hyperparameters = std::collections::BTreeMap::new();
    hyperparameters.insert("n_estimators".into(), params.n_estimators.to_string());
    hyperparameters.insert("learning_rate".into(), format!("{}", params.learning_rate));
    echo_cart(&params.base, &mut hyperparameters);

    Ok(TrainedModel {
        kind: ModelKind::GradientBoosting,
        hyperparameters,
        schema: FeatureSchema::of(matrix),
        params: LearnedParams::Boosted {
            init_scores,
            learning_rate: params.learning_rate,
            rounds,
            train_deviance,
        },
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
    use super::super::{train_cart, CartParams, LearnedParams, ModelKind, ModelSpec};
    use super::*;
    use crate::matrix::ColumnKind;

    fn gb_params(n_estimators: usize, learning_rate: f64, max_depth: usize) -> EnsembleParams {
        EnsembleParams {
            n_estimators,
            learning_rate,
            base: CartParams {
                max_depth,
                ..CartParams::default()
            },
            bootstrap: false,
            seed: 3,
        }
    }

    #[test]
    fn published_configuration_trains_and_is_echoed() {
        let m = toy_matrix();
        let spec = ModelSpec::default_for(ModelKind::GradientBoosting, 3);
        let model = spec.train(&m, 3).unwrap();
        assert_eq!(model.hyperparameters["learning_rate"], "0.1");
        assert_eq!(model.hyperparameters["max_depth"], "3");
        assert_eq!(model.hyperparameters["n_estimators"], "100");
        assert_eq!(model.predict(&m).unwrap(), m.labels);
    }

    #[test]
    fn one_large_step_is_at_least_as_accurate_as_a_single_tree() {
        let m = toy_matrix();
        let gb = train_gradient_boosting(&m, &gb_params(1, 10.0, 3)).unwrap();
        let cart = train_cart(
            &m,
            &CartParams {
                max_depth: 3,
                ..CartParams::default()
            },
            3,
        )
        .unwrap();
        let accuracy = |preds: &[usize]| {
            preds.iter().zip(&m.labels).filter(|(a, b)| a == b).count() as f64 / m.n_rows() as f64
        };
        assert!(accuracy(&gb.predict(&m).unwrap()) >= accuracy(&cart.predict(&m).unwrap()));
    }

    #[test]
    fn constant_labels_are_certain_from_the_prior_alone() {
        let m = FeatureMatrix::new(
            vec!["x".into()],
            vec![ColumnKind::Numeric],
            vec![1.0, 2.0, 3.0, 4.0],
            vec![0, 0, 0, 0],
            vec!["only".into()],
        )
        .unwrap();
        let model = train_gradient_boosting(&m, &gb_params(1, 0.1, 2)).unwrap();
        for row in model.predict_proba(&m).unwrap() {
            assert!(row[0] >= 0.99);
        }
    }

    #[test]
    fn training_deviance_is_non_increasing() {
        let m = toy_matrix();
        let model = train_gradient_boosting(&m, &gb_params(30, 0.1, 2)).unwrap();
        let LearnedParams::Boosted { train_deviance, .. } = &model.params else {
            unreachable!()
        };
        for pair in train_deviance.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9, "deviance rose: {pair:?}");
        }
    }

    #[test]
    fn shifting_all_class_scores_leaves_predictions_unchanged() {
        let m = toy_matrix();
        let model = train_gradient_boosting(&m, &gb_params(5, 0.1, 2)).unwrap();
        let mut shifted = model.clone();
        if let LearnedParams::Boosted { init_scores, .. } = &mut shifted.params {
            for s in init_scores.iter_mut() {
                *s += 7.5;
            }
        }
        assert_eq!(model.predict(&m).unwrap(), shifted.predict(&m).unwrap());
    }
}
