//! Isolation Forest anomaly detection, applied per server to page load
//! times, plus the one-standard-deviation baseline rule for comparison.
//!
//! Scoring follows the normalized-path-length construction: a point's path
//! length h(x) is the edge count from root to its terminating node (plus a
//! size adjustment at non-singleton external nodes), averaged over trees,
//! and the anomaly score is s(x, ψ) = 2^(−h(x)/c(ψ)), where c(n) is the
//! average unsuccessful-search path length of a binary search tree over n
//! points. c(n) uses the ln+γ harmonic approximation for every n ≥ 2 —
//! including tiny n, where it diverges from the exact harmonic value
//! (c(2) ≈ 0.154 here, exact 1.0); that approximation is the contract.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::types::PageviewRecord;

/// Euler–Mascheroni constant, to the precision the scoring formula pins.
pub const EULER_GAMMA: f64 = 0.5772156649;

/// Harmonic number estimate H(m) ≈ ln(m) + γ.
pub fn harmonic_estimate(m: u64) -> Result<f64> {
    if m < 1 {
        return Err(Error::input("harmonic_estimate requires m ≥ 1"));
    }
    Ok((m as f64).ln() + EULER_GAMMA)
}

/// Average unsuccessful-search path length c(n) = 2·H(n−1) − 2(n−1)/n for
/// n ≥ 2; a set of 0 or 1 points cannot be partitioned, so c is 0 there.
pub fn average_path_length(n: u64) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    2.0 * harmonic_estimate(n - 1).expect("n ≥ 2") - 2.0 * (n - 1) as f64 / n as f64
}

/// Anomaly score s = 2^(−h/c(n)) ∈ (0, 1]; h is a mean path length and n
/// the subsample size the forest was grown on.
pub fn anomaly_score(h: f64, n: u64) -> f64 {
    (-h / average_path_length(n)).exp2()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IForestParams {
    pub n_trees: usize,
    /// Subsample size ψ per tree (without replacement, capped at n).
    pub subsample_size: usize,
    pub seed: u64,
}

impl Default for IForestParams {
    fn default() -> Self {
        IForestParams {
            n_trees: 100,
            subsample_size: 256,
            seed: 0,
        }
    }
}

impl IForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees < 1 {
            return Err(Error::config("n_trees", "must be ≥ 1"));
        }
        if self.subsample_size < 2 {
            return Err(Error::config("subsample_size", "must be ≥ 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum ITreeNode {
    Internal {
        feature: usize,
        split: f64,
        left: usize,
        right: usize,
    },
    External {
        size: usize,
    },
}

/// Arena-allocated isolation tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct IsolationTree {
    nodes: Vec<ITreeNode>,
}

impl IsolationTree {
    /// Edges from root to the terminating node, plus c(size) at external
    /// nodes holding more than one training point.
    pub fn path_length(&self, point: &[f64]) -> f64 {
        let mut node = 0;
        let mut edges = 0.0;
        loop {
            match &self.nodes[node] {
                ITreeNode::Internal {
                    feature,
                    split,
                    left,
                    right,
                } => {
                    edges += 1.0;
                    node = if point[*feature] < *split { *left } else { *right };
                }
                ITreeNode::External { size } => {
                    return edges + average_path_length(*size as u64);
                }
            }
        }
    }

    pub fn height(&self) -> usize {
        fn depth_of(nodes: &[ITreeNode], node: usize) -> usize {
            match &nodes[node] {
                ITreeNode::External { .. } => 0,
                ITreeNode::Internal { left, right, .. } => {
                    1 + depth_of(nodes, *left).max(depth_of(nodes, *right))
                }
            }
        }
        depth_of(&self.nodes, 0)
    }
}

/// Fitted forest: trees plus the subsample size used for normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct IsolationForest {
    pub trees: Vec<IsolationTree>,
    /// Actual per-tree subsample size min(ψ, n).
    pub subsample_size: usize,
}

struct ITreeBuilder<'a> {
    points: &'a [Vec<f64>],
    height_limit: usize,
    nodes: Vec<ITreeNode>,
}

impl<'a> ITreeBuilder<'a> {
    fn grow(&mut self, members: &mut Vec<u32>, depth: usize, rng: &mut rand_chacha::ChaCha8Rng) -> usize {
        let size = members.len();
        if size <= 1 || depth >= self.height_limit {
            self.nodes.push(ITreeNode::External { size });
            return self.nodes.len() - 1;
        }
        let dims = self.points[0].len();
        // Only features with spread at this node are splittable; an
        // all-identical subset becomes an external node.
        let mut spread: Vec<(usize, f64, f64)> = Vec::with_capacity(dims);
        for feature in 0..dims {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &i in members.iter() {
                let v = self.points[i as usize][feature];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi > lo {
                spread.push((feature, lo, hi));
            }
        }
        if spread.is_empty() {
            self.nodes.push(ITreeNode::External { size });
            return self.nodes.len() - 1;
        }
        let (feature, lo, hi) = spread[rng.random_range(0..spread.len())];
        let split = rng.random_range(lo..hi);
        let (mut left, mut right): (Vec<u32>, Vec<u32>) = members
            .iter()
            .partition(|&&i| self.points[i as usize][feature] < split);
        // A split in (lo, hi) separates min from max; guard the measure-zero
        // exact-lo draw anyway.
        if left.is_empty() || right.is_empty() {
            self.nodes.push(ITreeNode::External { size });
            return self.nodes.len() - 1;
        }
        members.clear();
        members.shrink_to_fit();

        let placeholder = self.nodes.len();
        self.nodes.push(ITreeNode::External { size: 0 });
        let left_id = self.grow(&mut left, depth + 1, rng);
        let right_id = self.grow(&mut right, depth + 1, rng);
        self.nodes[placeholder] = ITreeNode::Internal {
            feature,
            split,
            left: left_id,
            right: right_id,
        };
        placeholder
    }
}

/// Fits an isolation forest on k-dimensional points. Each tree grows on a
/// without-replacement subsample of size min(ψ, n), splitting on a feature
/// chosen uniformly among those with spread, at a split value uniform in
/// (min, max), until the height limit ⌈log₂ ψ⌉, a singleton, or an
/// all-identical subset.
pub fn fit_iforest(points: &[Vec<f64>], params: &IForestParams) -> Result<IsolationForest> {
    params.validate()?;
    if points.len() < 2 {
        return Err(Error::input("isolation forest needs at least 2 points"));
    }
    if points
        .iter()
        .any(|p| p.len() != points[0].len() || p.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::input("points must share one finite dimensionality"));
    }
    let n = points.len();
    let psi = params.subsample_size.min(n);
    let height_limit = (psi as f64).log2().ceil() as usize;

    let trees: Vec<IsolationTree> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::stream(params.seed, &[0x1F0, t as u64]);
            // Partial Fisher–Yates draw of ψ indices without replacement.
            let mut order: Vec<u32> = (0..n as u32).collect();
            for i in 0..psi {
                let j = rng.random_range(i..n);
                order.swap(i, j);
            }
            let mut members = order[..psi].to_vec();
            let mut builder = ITreeBuilder {
                points,
                height_limit,
                nodes: Vec::new(),
            };
            builder.grow(&mut members, 0, &mut rng);
            IsolationTree { nodes: builder.nodes }
        })
        .collect();

    Ok(IsolationForest {
        trees,
        subsample_size: psi,
    })
}

impl IsolationForest {
    /// Mean path length h(x) over all trees.
    pub fn path_length(&self, point: &[f64]) -> f64 {
        let total: f64 = self.trees.iter().map(|t| t.path_length(point)).sum();
        total / self.trees.len() as f64
    }

    /// Anomaly score of one point.
    pub fn score(&self, point: &[f64]) -> f64 {
        anomaly_score(self.path_length(point), self.subsample_size as u64)
    }

    pub fn scores(&self, points: &[Vec<f64>]) -> Vec<f64> {
        points.par_iter().map(|p| self.score(p)).collect()
    }
}

/// Feature selectors for per-server detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnomalyFeature {
    PageLoadTime,
    PageDuration,
}

impl AnomalyFeature {
    fn extract(self, record: &PageviewRecord) -> f64 {
        match self {
            AnomalyFeature::PageLoadTime => record.page_load_time,
            AnomalyFeature::PageDuration => record.page_duration as f64,
        }
    }
}

/// How points are flagged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Thresholding {
    /// Flag the top `contamination` fraction of scores per server.
    Contamination(f64),
    /// An explicit score cutoff: flag score ≥ threshold.
    ScoreThreshold(f64),
}

#[derive(Debug, Clone)]
pub struct DetectParams {
    pub forest: IForestParams,
    pub thresholding: Thresholding,
    /// Also apply the baseline rule |x − mean| > standard deviation and
    /// report its flags next to the forest's.
    pub baseline: bool,
    pub features: Vec<AnomalyFeature>,
}

impl Default for DetectParams {
    fn default() -> Self {
        DetectParams {
            forest: IForestParams::default(),
            thresholding: Thresholding::Contamination(0.02),
            baseline: false,
            features: vec![AnomalyFeature::PageLoadTime],
        }
    }
}

/// One scored pageview within a server's report.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPoint {
    pub detail_id: i64,
    /// Ordinal position of the pageview on its server (time order, ties by
    /// detail id) — the x-axis of the per-server charts.
    pub index: usize,
    pub page_load_time: f64,
    pub score: f64,
    pub iforest_flag: bool,
    pub baseline_flag: Option<bool>,
}

/// Per-server scored sequence with its summary statistics.
#[derive(Debug, Clone)]
pub struct ServerReport {
    pub server_id: i64,
    pub points: Vec<ScoredPoint>,
    pub mean_load_time: f64,
    pub sd_load_time: f64,
    /// Score cutoff actually used for the forest flags.
    pub score_threshold: f64,
    pub iforest_anomalies: usize,
    pub baseline_anomalies: Option<usize>,
}

/// Full anomaly report across servers.
#[derive(Debug, Clone)]
pub struct AnomalyReport {
    pub servers: Vec<ServerReport>,
    /// Servers skipped because they had fewer than 2 pageviews.
    pub skipped: Vec<(i64, String)>,
}

impl AnomalyReport {
    pub fn total_anomalies(&self) -> usize {
        self.servers.iter().map(|s| s.iforest_anomalies).sum()
    }
}

/// Fits an independent forest per server over the selected features of its
/// pageviews and flags anomalies. Per-server seeds derive from
/// (seed, server id), so reports are stable under any parallel schedule.
pub fn detect_per_server(pageviews: &[PageviewRecord], params: &DetectParams) -> Result<AnomalyReport> {
    params.forest.validate()?;
    if let Thresholding::Contamination(c) = params.thresholding {
        if !(c > 0.0 && c < 0.5) {
            return Err(Error::config("contamination", "must be in (0, 0.5)"));
        }
    }
    if params.features.is_empty() {
        return Err(Error::config("features", "must select at least one feature"));
    }
    if pageviews.is_empty() {
        return Err(Error::input("no pageviews to analyze"));
    }

    let mut server_ids: Vec<i64> = pageviews.iter().map(|p| p.server_id).collect();
    server_ids.sort_unstable();
    server_ids.dedup();

    let mut servers = Vec::new();
    let mut skipped = Vec::new();
    for server_id in server_ids {
        let mut group: Vec<&PageviewRecord> =
            pageviews.iter().filter(|p| p.server_id == server_id).collect();
        group.sort_by_key(|p| (p.detail_date_time, p.detail_id));
        if group.len() < 2 {
            skipped.push((
                server_id,
                format!("server {server_id} has {} pageview(s); need ≥ 2", group.len()),
            ));
            continue;
        }

        let points: Vec<Vec<f64>> = group
            .iter()
            .map(|p| params.features.iter().map(|f| f.extract(p)).collect())
            .collect();
        let forest = fit_iforest(
            &points,
            &IForestParams {
                seed: seed::derive(params.forest.seed, &[0x5E4, server_id as u64]),
                ..params.forest
            },
        )?;
        let scores = forest.scores(&points);

        let n = group.len();
        let score_threshold = match params.thresholding {
            Thresholding::ScoreThreshold(t) => t,
            Thresholding::Contamination(c) => {
                // Cutoff at the k-th highest score with k = round(c·n), so
                // the flagged fraction tracks the contamination rate.
                let k = ((c * n as f64).round() as usize).clamp(1, n);
                let mut sorted = scores.clone();
                sorted.sort_by(f64::total_cmp);
                sorted[n - k]
            }
        };

        let loads: Vec<f64> = group.iter().map(|p| p.page_load_time).collect();
        let mean = loads.iter().sum::<f64>() / n as f64;
        let sd = (loads.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();

        let mut iforest_anomalies = 0;
        let mut baseline_anomalies = 0;
        let points: Vec<ScoredPoint> = group
            .iter()
            .zip(&scores)
            .enumerate()
            .map(|(index, (record, &score))| {
                let iforest_flag = score >= score_threshold;
                iforest_anomalies += usize::from(iforest_flag);
                let baseline_flag = params.baseline.then(|| {
                    let flag = sd > 0.0 && (record.page_load_time - mean).abs() > sd;
                    baseline_anomalies += usize::from(flag);
                    flag
                });
                ScoredPoint {
                    detail_id: record.detail_id,
                    index,
                    page_load_time: record.page_load_time,
                    score,
                    iforest_flag,
                    baseline_flag,
                }
            })
            .collect();

        servers.push(ServerReport {
            server_id,
            points,
            mean_load_time: mean,
            sd_load_time: sd,
            score_threshold,
            iforest_anomalies,
            baseline_anomalies: params.baseline.then_some(baseline_anomalies),
        });
    }

    Ok(AnomalyReport { servers, skipped })
}

/// Writes an anomaly report as CSV: `Server_ID,Index,Page_Load_Time,Score,
/// IForest_Flag[,Baseline_Flag]`; the baseline column appears only in
/// baseline mode.
pub fn write_report_csv(report: &AnomalyReport, writer: impl std::io::Write) -> Result<usize> {
    use std::io::Write;
    let baseline = report.servers.iter().any(|s| s.baseline_anomalies.is_some());
    let mut w = std::io::BufWriter::new(writer);
    let header = if baseline {
        "Server_ID,Index,Page_Load_Time,Score,IForest_Flag,Baseline_Flag"
    } else {
        "Server_ID,Index,Page_Load_Time,Score,IForest_Flag"
    };
    w.write_all(header.as_bytes())
        .and_then(|_| w.write_all(b"\n"))
        .map_err(|e| Error::io("<stream>", e))?;
    let mut count = 0;
    for server in &report.servers {
        for p in &server.points {
            let mut line = format!(
                "{},{},{:.3},{:.6},{}",
                server.server_id,
                p.index,
                p.page_load_time,
                p.score,
                u8::from(p.iforest_flag)
            );
            if baseline {
                line.push(',');
                line.push_str(&u8::from(p.baseline_flag.unwrap_or(false)).to_string());
            }
            w.write_all(line.as_bytes())
                .and_then(|_| w.write_all(b"\n"))
                .map_err(|e| Error::io("<stream>", e))?;
            count += 1;
        }
    }
    w.flush().map_err(|e| Error::io("<stream>", e))?;
    Ok(count)
}
