//! Size-constrained k-means: Lloyd iterations whose assignment step is a
//! min-cost flow with lower and upper cluster-size bounds.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::flow::MinCostFlow;
use super::ClusterError;
use crate::linalg::Matrix;
use crate::seed;

/// Size bounds and search settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub k: usize,
    pub min_size: usize,
    pub max_size: usize,
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
}

pub const DEFAULT_K: usize = 4;
pub const DEFAULT_RESTARTS: usize = 25;
pub const DEFAULT_MAX_ITER: usize = 100;

impl KMeansParams {
    /// Bounds `floor(0.8 n/k)` and `ceil(1.2 n/k)`.
    pub fn balanced(n: usize, k: usize, seed: u64) -> Self {
        let per = n as f64 / k as f64;
        Self {
            k,
            min_size: (0.8 * per).floor() as usize,
            max_size: (1.2 * per).ceil() as usize,
            seed,
            restarts: DEFAULT_RESTARTS,
            max_iter: DEFAULT_MAX_ITER,
        }
    }

    pub fn check(&self, n: usize) -> Result<(), ClusterError> {
        if self.k < 2 {
            return Err(ClusterError::TooFewClusters(self.k));
        }
        if self.min_size > self.max_size
            || self.k * self.min_size > n
            || self.k.saturating_mul(self.max_size) < n
        {
            return Err(ClusterError::InfeasibleBounds {
                n,
                k: self.k,
                min_size: self.min_size,
                max_size: self.max_size,
            });
        }
        Ok(())
    }
}

/// One Lloyd run or the best of several restarts.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansOutcome {
    /// Cluster per row, relabeled by first appearance in row order.
    pub labels: Vec<usize>,
    pub centers: Matrix,
    /// Within-cluster sum of squares.
    pub objective: f64,
    /// Objective after each accepted iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Within-cluster sum of squares of a labeling around the given centers.
pub fn wcss(points: &Matrix, labels: &[usize], centers: &Matrix) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(points.row(i), centers.row(l)))
        .sum()
}

/// Centroids of a labeling. An empty cluster keeps its previous center.
pub fn centroids(points: &Matrix, labels: &[usize], previous: &Matrix) -> Matrix {
    let (k, d) = (previous.rows(), points.cols());
    let mut sums = Matrix::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for j in 0..d {
            sums[(l, j)] += points[(i, j)];
        }
    }
    Matrix::from_fn(k, d, |h, j| {
        if counts[h] == 0 {
            previous[(h, j)]
        } else {
            sums[(h, j)] / counts[h] as f64
        }
    })
}

/// k-means++ seeding.
pub fn kmeans_plus_plus<R: Rng>(points: &Matrix, k: usize, rng: &mut R) -> Matrix {
    let n = points.rows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.row(i), points.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), points.row(next)));
        }
    }
    Matrix::from_fn(k, points.cols(), |h, j| points[(chosen[h], j)])
}

/// Assignment minimizing the total squared distance to `centers` subject to
/// `min_size <= |cluster| <= max_size`, solved exactly as a min-cost flow.
/// Distances are scaled to integers with resolution 1e-12 of the largest one.
pub fn assign_with_bounds(
    points: &Matrix,
    centers: &Matrix,
    min_size: usize,
    max_size: usize,
) -> Vec<usize> {
    let (n, k) = (points.rows(), centers.rows());
    let d: Vec<f64> = (0..n)
        .flat_map(|i| (0..k).map(move |h| (i, h)))
        .map(|(i, h)| sq_dist(points.row(i), centers.row(h)))
        .collect();
    let max_d = d.iter().fold(0.0_f64, |m, v| m.max(*v));
    let scale = if max_d > 0.0 { 1e12 / max_d } else { 1.0 };
    let cost = |i: usize, h: usize| (d[i * k + h] * scale).round() as i64;
    // any lower-bound unit is worth more than every distance combined
    let big = 1_000_000_000_000_i64 * (n as i64 + 1) + 1;

    let (source, sink) = (n + k, n + k + 1);
    let mut g = MinCostFlow::new(n + k + 2);
    for i in 0..n {
        g.add_edge(source, i, 1, 0);
    }
    let mut arcs = Vec::with_capacity(n * k);
    for i in 0..n {
        for h in 0..k {
            arcs.push(g.add_edge(i, n + h, 1, cost(i, h)));
        }
    }
    for h in 0..k {
        if min_size > 0 {
            g.add_edge(n + h, sink, min_size as i64, -big);
        }
        if max_size > min_size {
            g.add_edge(n + h, sink, (max_size - min_size) as i64, 0);
        }
    }
    g.run(source, sink, n as i64);
    let mut labels = vec![0; n];
    for i in 0..n {
        for h in 0..k {
            if g.flow(arcs[i * k + h]) > 0 {
                labels[i] = h;
            }
        }
    }
    labels
}

/// Lloyd iterations from fixed initial centers. An iteration is accepted
/// only if it does not increase the objective, so the trace is monotone.
pub fn lloyd_from(
    points: &Matrix,
    initial: Matrix,
    min_size: usize,
    max_size: usize,
    max_iter: usize,
) -> KMeansOutcome {
    let mut centers = initial;
    let mut labels: Option<Vec<usize>> = None;
    let mut objective = f64::INFINITY;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        let next_labels = assign_with_bounds(points, &centers, min_size, max_size);
        if labels.as_ref() == Some(&next_labels) {
            converged = true;
            break;
        }
        let next_centers = centroids(points, &next_labels, &centers);
        let next_obj = wcss(points, &next_labels, &next_centers);
        if next_obj > objective {
            // integer rounding in the flow can only cost ~1e-12 relative
            converged = true;
            break;
        }
        labels = Some(next_labels);
        centers = next_centers;
        objective = next_obj;
        trace.push(objective);
    }
    let labels = labels.unwrap_or_else(|| assign_with_bounds(points, &centers, min_size, max_size));
    KMeansOutcome {
        labels,
        centers,
        objective,
        trace,
        iterations,
        converged,
    }
}

/// Relabels clusters by first appearance in row order.
pub fn canonical_labels(labels: &[usize], k: usize) -> (Vec<usize>, Vec<usize>) {
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    let mut out = Vec::with_capacity(labels.len());
    for &l in labels {
        if map[l] == usize::MAX {
            map[l] = next;
            next += 1;
        }
        out.push(map[l]);
    }
    // clusters that ended up empty take the remaining ids
    for m in map.iter_mut() {
        if *m == usize::MAX {
            *m = next;
            next += 1;
        }
    }
    (out, map)
}

/// Best of `restarts` seeded k-means++ runs by objective, ties broken by the
/// lexicographically smaller canonical label vector.
pub fn constrained_kmeans_points(
    points: &Matrix,
    params: &KMeansParams,
) -> Result<KMeansOutcome, ClusterError> {
    let n = points.rows();
    params.check(n)?;
    let mut best: Option<KMeansOutcome> = None;
    for r in 0..params.restarts.max(1) {
        let mut rng = seed::rng(seed::sub_seed(params.seed, r as u64));
        let init = kmeans_plus_plus(points, params.k, &mut rng);
        let mut run = lloyd_from(
            points,
            init,
            params.min_size,
            params.max_size,
            params.max_iter,
        );
        let (labels, map) = canonical_labels(&run.labels, params.k);
        let mut centers = Matrix::zeros(params.k, points.cols());
        for (old, &new) in map.iter().enumerate() {
            for j in 0..points.cols() {
                centers[(new, j)] = run.centers[(old, j)];
            }
        }
        run.labels = labels;
        run.centers = centers;
        let better = match &best {
            None => true,
            Some(b) => {
                run.objective < b.objective
                    || (run.objective == b.objective && run.labels < b.labels)
            }
        };
        if better {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}
