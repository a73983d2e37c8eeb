//! One-dimensional k-means classification of deviation values.
//!
//! Detection starts with three clusters (normal, above, below). When two
//! adjacent centroids end up closer than the minimum separation the batch
//! is re-clustered with two, and if those are still too close the whole
//! batch is treated as normal.
//!
//! Two fitters are available. [`kmeans_1d`] is Lloyd's algorithm from
//! quantile seeds; [`kmeans_1d_optimal`] solves the 1-D problem exactly by
//! dynamic programming over sorted values. Detection uses the exact solver
//! by default: with few faulty points every quantile seed lands inside the
//! normal mass and Lloyd settles on a split of the normal cluster.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spc::ProcessStats;

/// Minimum centroid separation in units of the process sigma.
pub const SEPARATION_SIGMAS: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KMeansInit {
    /// Exact minimum-SSE partition.
    #[default]
    Optimal,
    /// Lloyd iterations from quantile seeds.
    Quantile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterPolicy {
    pub min_centroid_separation: f64,
    pub k_start: usize,
    pub max_iterations: usize,
    pub init: KMeansInit,
}

impl ClusterPolicy {
    pub fn from_stats(stats: &ProcessStats) -> Self {
        Self {
            min_centroid_separation: SEPARATION_SIGMAS * stats.sigma,
            k_start: 3,
            max_iterations: 300,
            init: KMeansInit::Optimal,
        }
    }

    pub fn with_init(self, init: KMeansInit) -> Self {
        Self { init, ..self }
    }

    pub fn fit(&self, values: &[f64], k: usize) -> Result<KMeans> {
        match self.init {
            KMeansInit::Optimal => kmeans_1d_optimal(values, k),
            KMeansInit::Quantile => kmeans_1d(values, k, self.max_iterations),
        }
    }
}

/// Raw Lloyd output.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    /// Non-decreasing; an empty cluster repeats its neighbour's centroid.
    pub centroids: Vec<f64>,
    pub labels: Vec<usize>,
    pub sizes: Vec<usize>,
    pub iterations: usize,
    pub sse: f64,
}

impl KMeans {
    pub fn has_empty_cluster(&self) -> bool {
        self.sizes.contains(&0)
    }

    /// True when every cluster is populated and adjacent centroids are at
    /// least `min_gap` apart.
    pub fn well_separated(&self, min_gap: f64) -> bool {
        !self.has_empty_cluster() && self.centroids.windows(2).all(|w| w[1] - w[0] >= min_gap)
    }
}

fn nearest(centroids: &[f64], v: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = (v - c).abs();
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

fn check_input(values: &[f64], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Misuse("k must be at least 1".into()));
    }
    if values.len() < k {
        return Err(Error::InsufficientData(format!(
            "{} values for {k} clusters",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Misuse("k-means input must be finite".into()));
    }
    Ok(())
}

/// Final nearest-centroid labelling shared by both fitters.
fn finish(values: &[f64], centroids: Vec<f64>, sizes: Vec<usize>, iterations: usize) -> KMeans {
    let labels: Vec<usize> = values.iter().map(|&v| nearest(&centroids, v)).collect();
    let sse = values
        .iter()
        .zip(&labels)
        .map(|(v, &j)| (v - centroids[j]).powi(2))
        .sum();
    KMeans {
        centroids,
        labels,
        sizes,
        iterations,
        sse,
    }
}

/// Lloyd's algorithm seeded with centroid `i` at the `(i + 0.5)/k` quantile.
pub fn kmeans_1d(values: &[f64], k: usize, max_iterations: usize) -> Result<KMeans> {
    check_input(values, k)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut centroids: Vec<f64> = (0..k)
        .map(|i| {
            let idx = (((i as f64 + 0.5) / k as f64) * n as f64).floor() as usize;
            sorted[idx.min(n - 1)]
        })
        .collect();

    let mut labels = vec![usize::MAX; n];
    let mut sizes = vec![0usize; k];
    let mut iterations = 0;
    loop {
        let mut changed = false;
        for (label, &v) in labels.iter_mut().zip(&sorted) {
            let j = nearest(&centroids, v);
            if *label != j {
                *label = j;
                changed = true;
            }
        }
        let mut sums = vec![0.0; k];
        sizes.iter_mut().for_each(|s| *s = 0);
        for (&j, &v) in labels.iter().zip(&sorted) {
            sums[j] += v;
            sizes[j] += 1;
        }
        for j in 0..k {
            if sizes[j] > 0 {
                centroids[j] = sums[j] / sizes[j] as f64;
            }
        }
        for j in 0..k {
            if sizes[j] == 0 {
                centroids[j] = nearest_populated(&centroids, &sizes, j);
            }
        }
        iterations += 1;
        if !changed || iterations >= max_iterations {
            break;
        }
    }

    Ok(finish(values, centroids, sizes, iterations))
}

/// Within-cluster SSE of contiguous runs of sorted values, from prefix sums.
struct RunCost {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl RunCost {
    fn new(sorted: &[f64]) -> Self {
        // Centring keeps the prefix sums of squares well conditioned.
        let shift = sorted[sorted.len() / 2];
        let mut sum = vec![0.0; sorted.len() + 1];
        let mut sum_sq = vec![0.0; sorted.len() + 1];
        for (i, v) in sorted.iter().enumerate() {
            let x = v - shift;
            sum[i + 1] = sum[i] + x;
            sum_sq[i + 1] = sum_sq[i] + x * x;
        }
        Self { sum, sum_sq }
    }

    /// SSE of `sorted[a..b]`.
    fn cost(&self, a: usize, b: usize) -> f64 {
        let n = (b - a) as f64;
        let s = self.sum[b] - self.sum[a];
        (self.sum_sq[b] - self.sum_sq[a] - s * s / n).max(0.0)
    }
}

/// Fills `cur[i]` for `i` in `lo..=hi` given the previous layer, using the
/// monotonicity of the optimal split point.
#[allow(clippy::too_many_arguments)]
fn fill_layer(
    rc: &RunCost,
    prev: &[f64],
    cur: &mut [f64],
    split: &mut [usize],
    lo: usize,
    hi: usize,
    opt_lo: usize,
    opt_hi: usize,
) {
    if lo > hi {
        return;
    }
    let mid = (lo + hi) / 2;
    let mut best = f64::INFINITY;
    let mut best_a = opt_lo;
    for a in opt_lo..=opt_hi.min(mid - 1) {
        let c = prev[a] + rc.cost(a, mid);
        if c < best {
            best = c;
            best_a = a;
        }
    }
    cur[mid] = best;
    split[mid] = best_a;
    if mid > lo {
        fill_layer(rc, prev, cur, split, lo, mid - 1, opt_lo, best_a);
    }
    fill_layer(rc, prev, cur, split, mid + 1, hi, best_a, opt_hi);
}

/// Exact 1-D k-means: the minimum-SSE partition of the sorted values into
/// `k` contiguous non-empty runs, in O(k·n·log n).
pub fn kmeans_1d_optimal(values: &[f64], k: usize) -> Result<KMeans> {
    check_input(values, k)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rc = RunCost::new(&sorted);

    // layer[j][i]: best SSE of the first i values in j + 1 clusters.
    let mut layers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut splits: Vec<Vec<usize>> = Vec::with_capacity(k);
    layers.push((0..=n).map(|i| if i == 0 { f64::INFINITY } else { rc.cost(0, i) }).collect());
    splits.push(vec![0; n + 1]);
    for j in 1..k {
        let mut cur = vec![f64::INFINITY; n + 1];
        let mut split = vec![0; n + 1];
        fill_layer(&rc, &layers[j - 1], &mut cur, &mut split, j + 1, n, j, n - 1);
        layers.push(cur);
        splits.push(split);
    }

    let mut bounds = vec![n];
    let mut end = n;
    for j in (1..k).rev() {
        end = splits[j][end];
        bounds.push(end);
    }
    bounds.push(0);
    bounds.reverse();
    let centroids: Vec<f64> = bounds
        .windows(2)
        .map(|w| sorted[w[0]..w[1]].iter().sum::<f64>() / (w[1] - w[0]) as f64)
        .collect();
    let mut sizes = vec![0; k];
    for &v in values {
        sizes[nearest(&centroids, v)] += 1;
    }
    Ok(finish(values, centroids, sizes, 0))
}

fn nearest_populated(centroids: &[f64], sizes: &[usize], j: usize) -> f64 {
    let k = centroids.len();
    (1..k)
        .flat_map(|off| [j.checked_sub(off), Some(j + off)])
        .flatten()
        .find(|&i| i < k && sizes[i] > 0)
        .map(|i| centroids[i])
        .unwrap_or(centroids[j])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    /// Cluster count retained: 3, 2, or 1 for the terminal all-normal state.
    pub k: usize,
    pub centroids: Vec<f64>,
    pub labels: Vec<usize>,
    pub normal_cluster: usize,
    /// Per-point fault flag.
    pub faulty: Vec<bool>,
    /// Cluster counts tried, in order.
    pub attempts: Vec<usize>,
}

impl ClusterResult {
    pub fn fault_count(&self) -> usize {
        self.faulty.iter().filter(|&&f| f).count()
    }
}

/// Classifies `values` with the 3 → 2 → 1 ladder. The populated cluster
/// whose centroid is nearest to `μ̂` is normal; every other cluster is
/// faulty.
pub fn cluster_detect(values: &[f64], stats: &ProcessStats, policy: &ClusterPolicy) -> Result<ClusterResult> {
    if !(policy.min_centroid_separation >= 0.0) {
        return Err(Error::Config("minimum centroid separation must be >= 0".into()));
    }
    let mut attempts = Vec::new();
    for k in (2..=policy.k_start.max(2)).rev() {
        attempts.push(k);
        let km = policy.fit(values, k)?;
        if km.well_separated(policy.min_centroid_separation) {
            let normal = nearest(&km.centroids, stats.mu);
            let faulty = km.labels.iter().map(|&l| l != normal).collect();
            return Ok(ClusterResult {
                k,
                centroids: km.centroids,
                labels: km.labels,
                normal_cluster: normal,
                faulty,
                attempts,
            });
        }
    }
    let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
    Ok(ClusterResult {
        k: 1,
        centroids: vec![mean],
        labels: vec![0; values.len()],
        normal_cluster: 0,
        faulty: vec![false; values.len()],
        attempts,
    })
}
