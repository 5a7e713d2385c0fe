//! Greedy binary decision trees: Gini classification trees (the shared base
//! learner) and least-squares regression trees (for boosting residuals).
//!
//! Split selection is exact: Gini decreases are compared with integer
//! arithmetic (cross-multiplied i128 fractions), so ties are well-defined
//! and break toward the lower feature index, then the lower threshold,
//! identically on every platform. Thresholds are midpoints of consecutive
//! distinct sorted values.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Impurity criterion for classification splits. Gini is the only one the
/// ensembles use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Impurity {
    Gini,
}

/// Features considered per split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureSubsample {
    /// Every feature (single trees, boosting).
    All,
    /// ⌊√d⌋ features drawn per split (random forests).
    Sqrt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub impurity: Impurity,
    pub feature_subsample: FeatureSubsample,
}

impl Default for CartParams {
    fn default() -> Self {
        CartParams {
            max_depth: 10,
            min_samples_split: 2,
            min_samples_leaf: 1,
            impurity: Impurity::Gini,
            feature_subsample: FeatureSubsample::All,
        }
    }
}

impl CartParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(Error::config("max_depth", "must be ≥ 1"));
        }
        if self.min_samples_split < 2 {
            return Err(Error::config("min_samples_split", "must be ≥ 2"));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::config("min_samples_leaf", "must be ≥ 1"));
        }
        Ok(())
    }
}

/// One tree node. Rows with `value ≤ threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Class-probability vector (classification) or a single fitted
        /// value (regression).
        value: Vec<f64>,
    },
}

/// Arena-allocated binary tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
    /// Per-feature weighted impurity decrease accumulated over this tree's
    /// splits (unnormalized; see `feature_importance`).
    pub importance: Vec<f64>,
}

impl Tree {
    pub fn leaf_value<'a>(&'a self, row: &[f64]) -> &'a [f64] {
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold { *left } else { *right };
                }
                TreeNode::Leaf { value } => return value,
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }
}

/// Candidate features for one split, honoring the subsample mode. The
/// result is ascending so the lower-feature-index tie-break holds.
fn candidate_features(
    d: usize,
    mode: FeatureSubsample,
    rng: &mut Option<&mut ChaCha8Rng>,
    scratch: &mut Vec<usize>,
) -> Vec<usize> {
    match mode {
        FeatureSubsample::All => (0..d).collect(),
        FeatureSubsample::Sqrt => {
            let m = ((d as f64).sqrt().floor() as usize).max(1);
            let rng = rng.as_mut().expect("sqrt subsampling requires an RNG");
            scratch.clear();
            scratch.extend(0..d);
            use rand::Rng;
            for i in 0..m {
                let j = rng.random_range(i..d);
                scratch.swap(i, j);
            }
            let mut chosen: Vec<usize> = scratch[..m].to_vec();
            chosen.sort_unstable();
            chosen
        }
    }
}

struct ClassificationGrower<'a> {
    matrix: &'a FeatureMatrix,
    params: &'a CartParams,
    n_classes: usize,
    n_total: usize,
    nodes: Vec<TreeNode>,
    importance: Vec<f64>,
    sort_buf: Vec<(f64, u32)>,
    feat_buf: Vec<usize>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    // Exact score: decrease = a / (n² · n_left · n_right).
    a: i128,
    n_left: i128,
    n_right: i128,
}

impl<'a> ClassificationGrower<'a> {
    fn leaf(&mut self, counts: &[i64], size: usize) -> usize {
        let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / size as f64).collect();
        self.nodes.push(TreeNode::Leaf { value: probs });
        self.nodes.len() - 1
    }

    fn grow(&mut self, indices: &mut Vec<u32>, depth: usize, rng: &mut Option<&mut ChaCha8Rng>) -> usize {
        let size = indices.len();
        let mut counts = vec![0i64; self.n_classes];
        for &i in indices.iter() {
            counts[self.matrix.labels[i as usize]] += 1;
        }
        let pure = counts.iter().any(|&c| c == size as i64);
        if depth >= self.params.max_depth || size < self.params.min_samples_split || pure {
            return self.leaf(&counts, size);
        }

        let features = candidate_features(
            self.matrix.n_cols(),
            self.params.feature_subsample,
            rng,
            &mut self.feat_buf,
        );
        let best = self.find_best_split(indices, &counts, &features);
        let Some(best) = best else {
            return self.leaf(&counts, size);
        };

        // Record importance: (node size / n_total) · per-sample decrease.
        let n = size as f64;
        let decrease =
            best.a as f64 / (n * n * best.n_left as f64 * best.n_right as f64);
        self.importance[best.feature] += (n / self.n_total as f64) * decrease;

        let (mut left, mut right): (Vec<u32>, Vec<u32>) = indices
            .iter()
            .partition(|&&i| self.matrix.get(i as usize, best.feature) <= best.threshold);
        indices.clear();
        indices.shrink_to_fit();

        let placeholder = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { value: Vec::new() });
        let left_id = self.grow(&mut left, depth + 1, rng);
        let right_id = self.grow(&mut right, depth + 1, rng);
        self.nodes[placeholder] = TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: left_id,
            right: right_id,
        };
        placeholder
    }

    /// Scans every (feature, threshold) candidate. The comparison
    /// `a₁·(nL₂·nR₂) > a₂·(nL₁·nR₁)` is the exact fraction comparison of the
    /// two Gini decreases (shared n² cancels); strict `>` with ascending
    /// enumeration yields the lower-feature, lower-threshold tie-break.
    fn find_best_split(
        &mut self,
        indices: &[u32],
        counts: &[i64],
        features: &[usize],
    ) -> Option<BestSplit> {
        let n = indices.len() as i128;
        let msl = self.params.min_samples_leaf as i128;
        let s_total: i128 = counts.iter().map(|&c| (c as i128) * (c as i128)).sum();
        let mut best: Option<BestSplit> = None;
        let mut left_counts = vec![0i64; self.n_classes];

        for &feature in features {
            self.sort_buf.clear();
            for &i in indices {
                self.sort_buf.push((
                    self.matrix.get(i as usize, feature),
                    self.matrix.labels[i as usize] as u32,
                ));
            }
            self.sort_buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

            left_counts.iter_mut().for_each(|c| *c = 0);
            let mut s_left: i128 = 0;
            let mut s_right: i128 = s_total;
            for p in 1..self.sort_buf.len() {
                let (prev_value, class) = self.sort_buf[p - 1];
                let c = class as usize;
                s_left += 2 * left_counts[c] as i128 + 1;
                s_right -= 2 * counts[c] as i128 - 2 * left_counts[c] as i128 - 1;
                left_counts[c] += 1;

                let value = self.sort_buf[p].0;
                if value <= prev_value {
                    continue;
                }
                let n_left = p as i128;
                let n_right = n - n_left;
                if n_left < msl || n_right < msl {
                    continue;
                }
                // a = −S_p·nL·nR + S_L·n·nR + S_R·n·nL, the Gini decrease
                // times n²·nL·nR. Gini is concave, so a ≥ 0 for every
                // split; zero-gain splits are still taken (stopping is by
                // depth, size, and purity only — XOR needs this).
                let a = -s_total * n_left * n_right + s_left * n * n_right + s_right * n * n_left;
                let better = match &best {
                    None => true,
                    Some(b) => a * (b.n_left * b.n_right) > b.a * (n_left * n_right),
                };
                if better {
                    best = Some(BestSplit {
                        feature,
                        threshold: midpoint(prev_value, value),
                        a,
                        n_left,
                        n_right,
                    });
                }
            }
        }
        best
    }
}

/// Midpoint threshold between two consecutive distinct values.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) / 2.0
}

/// Grows a Gini classification tree on the given rows (duplicates allowed,
/// as produced by bootstrap sampling). `rng` drives feature subsampling and
/// is unused in `All` mode.
pub fn grow_classification_tree(
    matrix: &FeatureMatrix,
    rows: &[u32],
    params: &CartParams,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Tree {
    let mut grower = ClassificationGrower {
        matrix,
        params,
        n_classes: matrix.n_classes(),
        n_total: rows.len(),
        nodes: Vec::new(),
        importance: vec![0.0; matrix.n_cols()],
        sort_buf: Vec::with_capacity(rows.len()),
        feat_buf: Vec::new(),
    };
    let mut indices = rows.to_vec();
    grower.grow(&mut indices, 0, &mut rng);
    Tree {
        nodes: grower.nodes,
        importance: grower.importance,
    }
}

/// Per-sample targets and curvature weights for a regression tree.
///
/// Split quality is the least-squares improvement on `targets`; leaf values
/// are the Newton step `scale · Σtarget / Σweight` (zero when the curvature
/// underflows), which is what multinomial boosting needs.
pub struct RegressionTargets<'a> {
    pub targets: &'a [f64],
    pub weights: &'a [f64],
    pub leaf_scale: f64,
}

struct RegressionGrower<'a> {
    matrix: &'a FeatureMatrix,
    params: &'a CartParams,
    reg: &'a RegressionTargets<'a>,
    n_total: usize,
    nodes: Vec<TreeNode>,
    importance: Vec<f64>,
    sort_buf: Vec<(f64, f64)>,
    feat_buf: Vec<usize>,
}

impl<'a> RegressionGrower<'a> {
    fn leaf(&mut self, indices: &[u32]) -> usize {
        let sum: f64 = indices.iter().map(|&i| self.reg.targets[i as usize]).sum();
        let weight: f64 = indices.iter().map(|&i| self.reg.weights[i as usize]).sum();
        let value = if weight.abs() < 1e-150 {
            0.0
        } else {
            self.reg.leaf_scale * sum / weight
        };
        self.nodes.push(TreeNode::Leaf { value: vec![value] });
        self.nodes.len() - 1
    }

    fn grow(&mut self, indices: &mut Vec<u32>, depth: usize, rng: &mut Option<&mut ChaCha8Rng>) -> usize {
        let size = indices.len();
        if depth >= self.params.max_depth || size < self.params.min_samples_split {
            return self.leaf(indices);
        }
        // Constant-target nodes are the regression analogue of purity.
        let sum: f64 = indices.iter().map(|&i| self.reg.targets[i as usize]).sum();
        let sum_sq: f64 = indices
            .iter()
            .map(|&i| {
                let t = self.reg.targets[i as usize];
                t * t
            })
            .sum();
        if sum_sq - sum * sum / size as f64 <= 1e-14 * size as f64 {
            return self.leaf(indices);
        }
        let features = candidate_features(
            self.matrix.n_cols(),
            self.params.feature_subsample,
            rng,
            &mut self.feat_buf,
        );

        let n = size as f64;
        let msl = self.params.min_samples_leaf;
        let total_sum: f64 = indices.iter().map(|&i| self.reg.targets[i as usize]).sum();
        let mut best: Option<(usize, f64, f64)> = None; // (feature, threshold, gain)
        for &feature in &features {
            self.sort_buf.clear();
            for &i in indices.iter() {
                self.sort_buf
                    .push((self.matrix.get(i as usize, feature), self.reg.targets[i as usize]));
            }
            self.sort_buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

            let mut left_sum = 0.0;
            for p in 1..self.sort_buf.len() {
                let (prev_value, target) = self.sort_buf[p - 1];
                left_sum += target;
                let value = self.sort_buf[p].0;
                if value <= prev_value {
                    continue;
                }
                let n_left = p;
                let n_right = size - p;
                if n_left < msl || n_right < msl {
                    continue;
                }
                let right_sum = total_sum - left_sum;
                let gain = left_sum * left_sum / n_left as f64
                    + right_sum * right_sum / n_right as f64
                    - total_sum * total_sum / n;
                if best.map_or(true, |(_, _, g)| gain > g) {
                    best = Some((feature, midpoint(prev_value, value), gain));
                }
            }
        }
        let Some((feature, threshold, gain)) = best else {
            return self.leaf(indices);
        };
        self.importance[feature] += gain.max(0.0) / self.n_total as f64;

        let (mut left, mut right): (Vec<u32>, Vec<u32>) = indices
            .iter()
            .partition(|&&i| self.matrix.get(i as usize, feature) <= threshold);
        indices.clear();
        indices.shrink_to_fit();

        let placeholder = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { value: Vec::new() });
        let left_id = self.grow(&mut left, depth + 1, rng);
        let right_id = self.grow(&mut right, depth + 1, rng);
        self.nodes[placeholder] = TreeNode::Split {
            feature,
            threshold,
            left: left_id,
            right: right_id,
        };
        placeholder
    }
}

/// Grows a least-squares regression tree on the given rows.
pub fn grow_regression_tree(
    matrix: &FeatureMatrix,
    rows: &[u32],
    params: &CartParams,
    reg: &RegressionTargets<'_>,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Tree {
    let mut grower = RegressionGrower {
        matrix,
        params,
        reg,
        n_total: rows.len(),
        nodes: Vec::new(),
        importance: vec![0.0; matrix.n_cols()],
        sort_buf: Vec::with_capacity(rows.len()),
        feat_buf: Vec::new(),
    };
    let mut indices = rows.to_vec();
    grower.grow(&mut indices, 0, &mut rng);
    Tree {
        nodes: grower.nodes,
        importance: grower.importance,
    }
}
