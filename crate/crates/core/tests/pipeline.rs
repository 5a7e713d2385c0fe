//! End-to-end library pipeline checks on generated traffic: feature
//! construction, training, evaluation, model persistence, and anomaly
//! detection working together.

use webmine_core::enrich;
use webmine_core::eval::{evaluate_split, SplitSpec};
use webmine_core::farmsim::{generate, SimConfig};
use webmine_core::fingerprint::fingerprint_sessions;
use webmine_core::learn::{self, ModelKind, ModelSpec};
use webmine_core::matrix::FeatureMatrix;

fn small_sessions() -> (webmine_core::farmsim::GenerateOutput, FeatureMatrix) {
    let out = generate(&SimConfig::new(600, 1)).unwrap();
    let matrix = enrich::features_exit_method(&out.sessions).unwrap();
    (out, matrix)
}

#[test]
fn exit_method_features_cover_all_sessions() {
    let (out, matrix) = small_sessions();
    assert_eq!(matrix.n_rows(), out.sessions.len());
    assert_eq!(enrich::base_feature_count(&matrix), 20);
    assert_eq!(matrix.class_names, vec!["0", "1", "2"]);
}

#[test]
fn split_evaluation_reports_on_held_out_rows() {
    let (_, matrix) = small_sessions();
    let spec = ModelSpec::Cart(learn::CartParams {
        max_depth: 8,
        ..learn::CartParams::default()
    });
    let split = SplitSpec {
        train_fraction: 0.7,
        stratified: true,
        seed: 4,
    };
    let eval = evaluate_split(&spec, &matrix, &split).unwrap();
    assert_eq!(eval.train_indices.len() + eval.test_indices.len(), matrix.n_rows());
    assert!(eval.report.accuracy > 0.8, "accuracy {}", eval.report.accuracy);
    // the weighted-recall/accuracy identity holds on real reports too
    assert!((eval.report.weighted_recall - eval.report.accuracy).abs() <= 1e-12);
}

#[test]
fn every_model_family_round_trips_through_disk_on_a_large_probe() {
    // 10 000-row probe set; every family's reloaded model must reproduce
    // its predictions bit-exactly.
    let out = generate(&SimConfig::new(8600, 1)).unwrap();
    let matrix = enrich::features_service_access(&out.sessions, "mail").unwrap();
    assert!(matrix.n_rows() >= 10_000, "probe has {} rows", matrix.n_rows());
    let probe = matrix.select_rows(&(0..10_000).collect::<Vec<_>>());
    let train = matrix.select_rows(&(0..1_500).collect::<Vec<_>>());

    let dir = tempfile::tempdir().unwrap();
    for kind in [
        ModelKind::Cart,
        ModelKind::RandomForest,
        ModelKind::GradientBoosting,
        ModelKind::LogisticRegression,
        ModelKind::SvmRbf,
    ] {
        let mut spec = ModelSpec::default_for(kind, 17);
        // keep ensembles small; the probe is what is large here
        if matches!(kind, ModelKind::RandomForest | ModelKind::GradientBoosting) {
            spec = spec.with_param("n_estimators", 10.0).unwrap();
        }
        if kind == ModelKind::SvmRbf {
            spec = spec.with_param("max_passes", 30.0).unwrap();
        }
        let model = spec
            .train(&train, 17)
            .unwrap()
            .with_provenance(fingerprint_sessions(&out.sessions), 0, Some("service-access:mail".into()));
        let path = dir.path().join(format!("{}.model.json", kind.as_str()));
        learn::save_model(&model, &path).unwrap();
        let reloaded = learn::load_model(&path).unwrap();
        assert_eq!(reloaded, model);
        assert_eq!(
            reloaded.predict_proba(&probe).unwrap(),
            model.predict_proba(&probe).unwrap(),
            "{} probe predictions changed after reload",
            kind.as_str()
        );
    }
}

#[test]
fn forest_beats_chance_on_the_planted_exit_signal() {
    let (_, matrix) = small_sessions();
    let spec = ModelSpec::default_for(ModelKind::RandomForest, 5).with_param("n_estimators", 30.0).unwrap();
    let split = SplitSpec {
        train_fraction: 0.7,
        stratified: true,
        seed: 5,
    };
    let eval = evaluate_split(&spec, &matrix, &split).unwrap();
    assert!(eval.report.accuracy >= 0.85, "accuracy {}", eval.report.accuracy);
}

#[test]
fn importance_is_dominated_by_the_planted_driver_on_last_service() {
    let out = generate(&SimConfig::new(800, 1)).unwrap();
    let matrix = enrich::features_last_service(&out.sessions).unwrap();
    let spec = ModelSpec::default_for(ModelKind::GradientBoosting, 6)
        .with_param("n_estimators", 25.0)
        .unwrap();
    let model = spec.train(&matrix, 6).unwrap();
    let importance = model.feature_importance().unwrap();
    assert_eq!(importance[0].0, "p_obis", "importance order: {importance:?}");
    let total: f64 = importance.iter().map(|(_, v)| v).sum();
    assert!((total - 1.0).abs() <= 1e-9);
}
