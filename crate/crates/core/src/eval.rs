//! Classification metrics: confusion matrices, per-class precision /
//! recall / F1 with supports, support-weighted averages, accuracy, and
//! deterministic stratified train/test evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::{ModelSpec, TrainedModel};
use crate::matrix::FeatureMatrix;
use crate::seed;

const TAG_SPLIT: u64 = 0x5B117;

/// k×k count matrix; entry (i, j) counts true class i predicted as j.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

pub fn confusion_matrix(truth: &[usize], predicted: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::input(format!(
            "label vectors differ in length: {} vs {}",
            truth.len(),
            predicted.len()
        )));
    }
    let mut counts = vec![vec![0usize; n_classes]; n_classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= n_classes || p >= n_classes {
            return Err(Error::input(format!(
                "label pair ({t}, {p}) out of range for {n_classes} classes"
            )));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().map(|row| row.iter().sum::<usize>()).sum()
    }
}

/// Per-class metrics row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class_name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    /// True when the class was never predicted, so its precision fell back
    /// to the zero-division convention.
    pub zero_division: bool,
}

/// Full classification report in the published table layout: one row per
/// class plus a support-weighted average row and overall accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub per_class: Vec<ClassMetrics>,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub accuracy: f64,
    pub total_support: usize,
}

/// Support-weighted average: Σ supportᵢ·valueᵢ / Σ supportᵢ.
pub fn weighted_average(values: &[f64], supports: &[usize]) -> f64 {
    let total: usize = supports.iter().sum();
    values
        .iter()
        .zip(supports)
        .map(|(v, &s)| v * s as f64)
        .sum::<f64>()
        / total as f64
}

/// Derives the report from a confusion matrix. Precision of a
/// never-predicted class is 0 (flagged); F1 is 0 when precision and recall
/// are both 0.
pub fn classification_report(matrix: &ConfusionMatrix, class_names: &[String]) -> Result<ClassReport> {
    let k = matrix.n_classes();
    if k < 2 {
        return Err(Error::input("a classification report needs at least 2 classes"));
    }
    if class_names.len() != k {
        return Err(Error::input("class name count must match the matrix size"));
    }
    let n = matrix.total();
    if n == 0 {
        return Err(Error::input("empty confusion matrix"));
    }

    let mut per_class = Vec::with_capacity(k);
    for i in 0..k {
        let support: usize = matrix.counts[i].iter().sum();
        let predicted: usize = (0..k).map(|r| matrix.counts[r][i]).sum();
        let hit = matrix.counts[i][i];
        let zero_division = predicted == 0;
        let precision = if zero_division { 0.0 } else { hit as f64 / predicted as f64 };
        let recall = if support == 0 { 0.0 } else { hit as f64 / support as f64 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_class.push(ClassMetrics {
            class_name: class_names[i].clone(),
            precision,
            recall,
            f1,
            support,
            zero_division,
        });
    }

    let supports: Vec<usize> = per_class.iter().map(|c| c.support).collect();
    let trace: usize = (0..k).map(|i| matrix.counts[i][i]).sum();
    Ok(ClassReport {
        weighted_precision: weighted_average(
            &per_class.iter().map(|c| c.precision).collect::<Vec<_>>(),
            &supports,
        ),
        weighted_recall: weighted_average(
            &per_class.iter().map(|c| c.recall).collect::<Vec<_>>(),
            &supports,
        ),
        weighted_f1: weighted_average(&per_class.iter().map(|c| c.f1).collect::<Vec<_>>(), &supports),
        accuracy: trace as f64 / n as f64,
        total_support: n,
        per_class,
    })
}

impl ClassReport {
    /// Plain-text table in the published layout (Precision / Recall /
    /// F1 Score / Support columns, Weighted Avg. row).
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let name_width = self
            .per_class
            .iter()
            .map(|c| c.class_name.len())
            .chain(std::iter::once("Weighted Avg.".len()))
            .max()
            .unwrap_or(5)
            .max("Class".len());
        out.push_str(&format!(
            "{:<name_width$}  {:>9}  {:>9}  {:>9}  {:>9}\n",
            "Class", "Precision", "Recall", "F1 Score", "Support"
        ));
        for c in &self.per_class {
            out.push_str(&format!(
                "{:<name_width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>9}{}\n",
                c.class_name,
                c.precision,
                c.recall,
                c.f1,
                c.support,
                if c.zero_division { "  (never predicted)" } else { "" }
            ));
        }
        out.push_str(&format!(
            "{:<name_width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>9}\n",
            "Weighted Avg.", self.weighted_precision, self.weighted_recall, self.weighted_f1, self.total_support
        ));
        out.push_str(&format!(
            "\nAccuracy: {:.4} (n = {})\n",
            self.accuracy, self.total_support
        ));
        out
    }

    /// CSV rendering: class rows, a `weighted_avg` row, an `accuracy` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("Class,Precision,Recall,F1_Score,Support\n");
        for c in &self.per_class {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{}\n",
                c.class_name, c.precision, c.recall, c.f1, c.support
            ));
        }
        out.push_str(&format!(
            "weighted_avg,{:.6},{:.6},{:.6},{}\n",
            self.weighted_precision, self.weighted_recall, self.weighted_f1, self.total_support
        ));
        out.push_str(&format!(
            "accuracy,{:.6},{:.6},{:.6},{}\n",
            self.accuracy, self.accuracy, self.accuracy, self.total_support
        ));
        out
    }
}

/// Train/test split specification. `train_fraction` is the share of each
/// class that goes to training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub stratified: bool,
    pub seed: u64,
}

/// Deterministic (train, test) index partition. Stratified mode rounds the
/// train share per class, keeping class proportions within one row of the
/// global ones.
pub fn train_test_split(
    labels: &[usize],
    n_classes: usize,
    spec: &SplitSpec,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::config("train_fraction", "must be in (0, 1)"));
    }
    use rand::Rng;
    let mut train = Vec::new();
    let mut test = Vec::new();
    let shuffled = |members: &mut Vec<usize>, tag: u64| {
        let mut rng = seed::stream(spec.seed, &[TAG_SPLIT, tag]);
        for i in (1..members.len()).rev() {
            let j = rng.random_range(0..=i);
            members.swap(i, j);
        }
    };
    if spec.stratified {
        for class in 0..n_classes {
            let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
            if members.is_empty() {
                continue;
            }
            shuffled(&mut members, class as u64);
            let n_train = (spec.train_fraction * members.len() as f64).round() as usize;
            if n_train == 0 || n_train == members.len() {
                return Err(Error::input(format!(
                    "class {class} ({} rows) would be absent from one side of the split; use more data or adjust the fraction",
                    members.len()
                )));
            }
            train.extend_from_slice(&members[..n_train]);
            test.extend_from_slice(&members[n_train..]);
        }
    } else {
        let mut members: Vec<usize> = (0..labels.len()).collect();
        shuffled(&mut members, u64::MAX);
        let n_train = (spec.train_fraction * members.len() as f64).round() as usize;
        if n_train == 0 || n_train == members.len() {
            return Err(Error::input("split would leave one side empty"));
        }
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    // Both sides must see every class, or downstream metrics are undefined.
    for (side, name) in [(&train, "training"), (&test, "test")] {
        let mut seen = vec![false; n_classes];
        for &i in side.iter() {
            seen[labels[i]] = true;
        }
        if let Some(class) = seen.iter().position(|&s| !s) {
            return Err(Error::input(format!(
                "class {class} is absent from the {name} split; stratify or use more data"
            )));
        }
    }
    Ok((train, test))
}

/// Outcome of a split evaluation: the trained model, its test-set report,
/// and the split membership.
#[derive(Debug, Clone)]
pub struct SplitEvaluation {
    pub model: TrainedModel,
    pub report: ClassReport,
    pub confusion: ConfusionMatrix,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Trains `spec` on the training side of a deterministic stratified split
/// and reports on the held-out side.
pub fn evaluate_split(
    model_spec: &ModelSpec,
    matrix: &FeatureMatrix,
    split: &SplitSpec,
) -> Result<SplitEvaluation> {
    let (train_indices, test_indices) = train_test_split(&matrix.labels, matrix.n_classes(), split)?;
    let train = matrix.select_rows(&train_indices);
    let test = matrix.select_rows(&test_indices);
    let model = model_spec.train(&train, split.seed)?;
    let predictions = model.predict(&test)?;
    let confusion = confusion_matrix(&test.labels, &predictions, matrix.n_classes())?;
    let report = classification_report(&confusion, &matrix.class_names)?;
    Ok(SplitEvaluation {
        model,
        report,
        confusion,
        train_indices,
        test_indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions_give_a_diagonal_matrix_and_unit_metrics() {
        let labels = vec![0, 1, 2, 1, 0, 2];
        let cm = confusion_matrix(&labels, &labels, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(cm.counts[i][j] > 0, i == j);
            }
        }
        let names = vec!["0".to_string(), "1".to_string(), "2".to_string()];
        let report = classification_report(&cm, &names).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert!(report.per_class.iter().all(|c| c.precision == 1.0 && c.recall == 1.0 && c.f1 == 1.0));
    }

    #[test]
    fn constant_predictions_fill_one_column() {
        let truth = vec![0, 1, 2, 1];
        let predicted = vec![0, 0, 0, 0];
        let cm = confusion_matrix(&truth, &predicted, 3).unwrap();
        for i in 0..3 {
            for j in 1..3 {
                assert_eq!(cm.counts[i][j], 0);
            }
            assert_eq!(cm.counts[i][0], truth.iter().filter(|&&t| t == i).count());
        }
        let names = vec!["0".to_string(), "1".to_string(), "2".to_string()];
        let report = classification_report(&cm, &names).unwrap();
        assert!(report.per_class[1].zero_division);
        assert_eq!(report.per_class[1].precision, 0.0);
    }

    #[test]
    fn random_labels_match_a_hand_counting_oracle() {
        use rand::Rng;
        let mut rng = crate::seed::stream(5, &[]);
        let truth: Vec<usize> = (0..100).map(|_| rng.random_range(0..4)).collect();
        let predicted: Vec<usize> = (0..100).map(|_| rng.random_range(0..4)).collect();
        let cm = confusion_matrix(&truth, &predicted, 4).unwrap();
        // brute-force recount
        for i in 0..4 {
            for j in 0..4 {
                let expected = truth
                    .iter()
                    .zip(&predicted)
                    .filter(|(&t, &p)| t == i && p == j)
                    .count();
                assert_eq!(cm.counts[i][j], expected);
            }
        }
        assert_eq!(cm.total(), 100);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(confusion_matrix(&[0, 1], &[0], 2).is_err());
        assert!(confusion_matrix(&[0, 2], &[0, 1], 2).is_err());
        // reports need ≥ 2 classes and ≥ 1 observation
        let empty = ConfusionMatrix { counts: vec![vec![0, 0], vec![0, 0]] };
        assert!(classification_report(&empty, &["0".into(), "1".into()]).is_err());
        let tiny = ConfusionMatrix { counts: vec![vec![3]] };
        assert!(classification_report(&tiny, &["0".into()]).is_err());
    }

    #[test]
    fn hand_computed_three_class_matrix() {
        // [[5,1,0],[2,7,1],[0,0,4]]: recall₀ = 5/6, precision₀ = 5/7, ...
        let cm = ConfusionMatrix {
            counts: vec![vec![5, 1, 0], vec![2, 7, 1], vec![0, 0, 4]],
        };
        let names = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let report = classification_report(&cm, &names).unwrap();
        assert!((report.per_class[0].recall - 5.0 / 6.0).abs() < 1e-12);
        assert!((report.per_class[0].precision - 5.0 / 7.0).abs() < 1e-12);
        assert!((report.per_class[1].recall - 0.7).abs() < 1e-12);
        assert!((report.per_class[2].precision - 4.0 / 5.0).abs() < 1e-12);
        assert_eq!(report.total_support, 20);
        assert!((report.accuracy - 16.0 / 20.0).abs() < 1e-12);
    }

    #[test]
    fn published_class_f1_and_supports_reproduce_the_weighted_average() {
        let weighted = weighted_average(&[0.93, 0.94, 0.81], &[163_187, 192_866, 10_222]);
        assert!((weighted - 0.93).abs() <= 0.005, "weighted F1 {weighted}");
    }

    #[test]
    fn weighted_recall_equals_accuracy() {
        use rand::Rng;
        let mut rng = crate::seed::stream(8, &[]);
        for _ in 0..20 {
            let truth: Vec<usize> = (0..200).map(|_| rng.random_range(0..3)).collect();
            let predicted: Vec<usize> = (0..200).map(|_| rng.random_range(0..3)).collect();
            let cm = confusion_matrix(&truth, &predicted, 3).unwrap();
            let names = vec!["0".to_string(), "1".to_string(), "2".to_string()];
            let report = classification_report(&cm, &names).unwrap();
            assert!((report.weighted_recall - report.accuracy).abs() <= 1e-12);
        }
    }

    #[test]
    fn split_sizes_and_membership_are_deterministic() {
        let labels: Vec<usize> = (0..1000).map(|i| usize::from(i % 10 == 0)).collect();
        let spec = SplitSpec {
            train_fraction: 0.7,
            stratified: true,
            seed: 13,
        };
        let (train_a, test_a) = train_test_split(&labels, 2, &spec).unwrap();
        let (train_b, test_b) = train_test_split(&labels, 2, &spec).unwrap();
        assert_eq!(train_a, train_b);
        assert_eq!(test_a, test_b);
        // 900 of class 0, 100 of class 1 → test 270 + 30
        assert_eq!(test_a.len(), 300);
        assert_eq!(train_a.len(), 700);
        let test_ones = test_a.iter().filter(|&&i| labels[i] == 1).count();
        assert_eq!(test_ones, 30);
    }

    #[test]
    fn stratified_split_keeps_class_proportions_within_one_row() {
        let labels: Vec<usize> = (0..97).map(|i| usize::from(i % 3 == 0)).collect();
        let spec = SplitSpec {
            train_fraction: 0.7,
            stratified: true,
            seed: 13,
        };
        let (train, _) = train_test_split(&labels, 2, &spec).unwrap();
        let class1 = labels.iter().filter(|&&l| l == 1).count();
        let train1 = train.iter().filter(|&&i| labels[i] == 1).count();
        let expected = spec.train_fraction * class1 as f64;
        assert!((train1 as f64 - expected).abs() <= 1.0);
    }

    #[test]
    fn single_member_classes_cannot_be_split() {
        let labels = vec![0, 0, 0, 0, 1];
        let spec = SplitSpec {
            train_fraction: 0.7,
            stratified: true,
            seed: 13,
        };
        let err = train_test_split(&labels, 2, &spec).unwrap_err().to_string();
        assert!(err.contains("absent"), "{err}");
    }
}
