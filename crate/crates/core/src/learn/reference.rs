//! Brute-force reference tree for verification.
//!
//! This is an intentionally naive exhaustive-split CART: at every node it
//! re-counts class members from scratch for every (feature, threshold)
//! candidate, O(n²·d) per node, sharing no code with the production grower.
//! It uses the same exact integer split comparison and the same tie-break
//! convention (lower feature index, then lower threshold), so on small
//! inputs the production tree must reproduce its predictions exactly.
//!
//! Verification-only; nothing in the pipeline calls it.

use crate::matrix::FeatureMatrix;

use super::cart::{midpoint, CartParams, FeatureSubsample};
use super::argmax_low;

enum RefNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<RefNode>,
        right: Box<RefNode>,
    },
    Leaf {
        probs: Vec<f64>,
    },
}

fn class_counts(matrix: &FeatureMatrix, rows: &[usize]) -> Vec<i64> {
    let mut counts = vec![0i64; matrix.n_classes()];
    for &i in rows {
        counts[matrix.labels[i]] += 1;
    }
    counts
}

fn sum_sq(counts: &[i64]) -> i128 {
    counts.iter().map(|&c| (c as i128) * (c as i128)).sum()
}

fn grow(matrix: &FeatureMatrix, rows: &[usize], params: &CartParams, depth: usize) -> RefNode {
    let size = rows.len();
    let counts = class_counts(matrix, rows);
    let leaf = || RefNode::Leaf {
        probs: counts.iter().map(|&c| c as f64 / size as f64).collect(),
    };
    if depth >= params.max_depth
        || size < params.min_samples_split
        || counts.iter().any(|&c| c == size as i64)
    {
        return leaf();
    }

    let n = size as i128;
    let s_total = sum_sq(&counts);
    // best = (a, n_left, n_right, feature, threshold)
    let mut best: Option<(i128, i128, i128, usize, f64)> = None;
    for feature in 0..matrix.n_cols() {
        let mut values: Vec<f64> = rows.iter().map(|&i| matrix.get(i, feature)).collect();
        values.sort_unstable_by(f64::total_cmp);
        values.dedup();
        for pair in values.windows(2) {
            let threshold = midpoint(pair[0], pair[1]);
            let left: Vec<usize> = rows
                .iter()
                .copied()
                .filter(|&i| matrix.get(i, feature) <= threshold)
                .collect();
            let n_left = left.len() as i128;
            let n_right = n - n_left;
            if n_left < params.min_samples_leaf as i128 || n_right < params.min_samples_leaf as i128 {
                continue;
            }
            let s_left = sum_sq(&class_counts(matrix, &left));
            let right: Vec<usize> = rows
                .iter()
                .copied()
                .filter(|&i| matrix.get(i, feature) > threshold)
                .collect();
            let s_right = sum_sq(&class_counts(matrix, &right));
            let a = -s_total * n_left * n_right + s_left * n * n_right + s_right * n * n_left;
            let better = match best {
                None => true,
                Some((ba, bl, br, _, _)) => a * (bl * br) > ba * (n_left * n_right),
            };
            if better {
                best = Some((a, n_left, n_right, feature, threshold));
            }
        }
    }

    let Some((_, _, _, feature, threshold)) = best else {
        return leaf();
    };
    let left: Vec<usize> = rows
        .iter()
        .copied()
        .filter(|&i| matrix.get(i, feature) <= threshold)
        .collect();
    let right: Vec<usize> = rows
        .iter()
        .copied()
        .filter(|&i| matrix.get(i, feature) > threshold)
        .collect();
    RefNode::Split {
        feature,
        threshold,
        left: Box::new(grow(matrix, &left, params, depth + 1)),
        right: Box::new(grow(matrix, &right, params, depth + 1)),
    }
}

fn walk<'a>(node: &'a RefNode, row: &[f64]) -> &'a [f64] {
    match node {
        RefNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            if row[*feature] <= *threshold {
                walk(left, row)
            } else {
                walk(right, row)
            }
        }
        RefNode::Leaf { probs } => probs,
    }
}

/// Grows the exhaustive reference tree and predicts every row of `matrix`.
/// Feature subsampling is out of scope for the reference; it considers all
/// features, so compare against trees grown with `FeatureSubsample::All`.
pub fn reference_cart_predictions(matrix: &FeatureMatrix, params: &CartParams) -> Vec<usize> {
    assert!(
        matches!(params.feature_subsample, FeatureSubsample::All),
        "the reference tree considers all features"
    );
    let rows: Vec<usize> = (0..matrix.n_rows()).collect();
    let root = grow(matrix, &rows, params, 0);
    (0..matrix.n_rows())
        .map(|i| argmax_low(walk(&root, matrix.row(i))))
        .collect()
}
