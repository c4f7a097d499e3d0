//! Synergy networks over the inputs of one (industry, cluster), their
//! binary backbones, topology statistics and a degree-preserving null model
//! for sector mixing.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::gpid::PidResult;
use crate::iotensor::{IndustryId, Sector};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::seed;
use crate::stats::{self, Stars};

pub const DEFAULT_DELTA: f64 = 1.64;
pub const DEFAULT_DISPARITY_ALPHA: f64 = 0.05;
pub const DEFAULT_NULL_SAMPLES: usize = 100;
pub const CENTRALITY_TOL: f64 = 1e-10;
const CENTRALITY_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("score refers to input {0:?}, which is not a node")]
    UnknownNode(IndustryId),
    #[error("score pairs input {0:?} with itself")]
    SelfPair(IndustryId),
    #[error("conflicting scores for pair ({0:?}, {1:?})")]
    ConflictingScores(IndustryId, IndustryId),
    #[error("weights must be square, symmetric, nonnegative with zero diagonal")]
    BadWeights,
    #[error("network has no positive weight")]
    EmptyNetwork,
    #[error("backbone has no edge")]
    EmptyBackbone,
    #[error("null ensemble needs at least one sample")]
    NoSamples,
    #[error("node distribution must have one nonnegative entry per node and positive mass")]
    BadDistribution,
    #[error("node {0} has no sector")]
    MissingSector(usize),
}

/// Weighted undirected network; weights are corrected synergies floored at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SynergyNetwork {
    pub industry: Option<IndustryId>,
    pub cluster: Option<usize>,
    pub nodes: Vec<IndustryId>,
    pub weights: Matrix,
}

impl SynergyNetwork {
    /// Validates a weight matrix over `nodes`.
    pub fn from_weights(nodes: Vec<IndustryId>, weights: Matrix) -> Result<Self, NetworkError> {
        let n = nodes.len();
        if weights.rows() != n || weights.cols() != n {
            return Err(NetworkError::BadWeights);
        }
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(NetworkError::BadWeights);
            }
            for j in 0..n {
                let w = weights[(i, j)];
                if !(w >= 0.0) || !w.is_finite() || w != weights[(j, i)] {
                    return Err(NetworkError::BadWeights);
                }
            }
        }
        Ok(Self {
            industry: None,
            cluster: None,
            nodes,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Positive-weight edges `(i, j, w)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let w = self.weights[(i, j)];
                if w > 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    pub fn strengths(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.weights.row(i).iter().sum())
            .collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            weights: self.weights.scale(c),
            ..self.clone()
        }
    }
}

/// Builds the network of one (industry, cluster) from pairwise scores.
/// Returns the pairs that had no score; they get weight 0.
pub fn build_synergy_network(
    nodes: &[IndustryId],
    scores: &[(IndustryId, IndustryId, PidResult)],
    industry: Option<IndustryId>,
    cluster: Option<usize>,
) -> Result<(SynergyNetwork, Vec<(IndustryId, IndustryId)>), NetworkError> {
    let n = nodes.len();
    let pos = |id: IndustryId| {
        nodes
            .iter()
            .position(|&x| x == id)
            .ok_or(NetworkError::UnknownNode(id))
    };
    let mut seen: Vec<Option<f64>> = vec![None; n * n];
    for (a, b, r) in scores {
        let (i, j) = (pos(*a)?, pos(*b)?);
        if i == j {
            return Err(NetworkError::SelfPair(*a));
        }
        let (i, j) = (i.min(j), i.max(j));
        let s = r.synergy();
        match seen[i * n + j] {
            Some(prev) if prev.to_bits() != s.to_bits() => {
                return Err(NetworkError::ConflictingScores(nodes[i], nodes[j]));
            }
            _ => seen[i * n + j] = Some(s),
        }
    }
    let mut weights = Matrix::zeros(n, n);
    let mut missing = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            match seen[i * n + j] {
                Some(s) => {
                    let w = if s > 0.0 { s } else { 0.0 };
                    weights[(i, j)] = w;
                    weights[(j, i)] = w;
                }
                None => missing.push((nodes[i], nodes[j])),
            }
        }
    }
    Ok((
        SynergyNetwork {
            industry,
            cluster,
            nodes: nodes.to_vec(),
            weights,
        },
        missing,
    ))
}

/// Binary backbone; `provenance` holds the source weight of kept edges.
#[derive(Debug, Clone, PartialEq)]
pub struct BackboneNetwork {
    pub industry: Option<IndustryId>,
    pub cluster: Option<usize>,
    pub nodes: Vec<IndustryId>,
    adjacency: Vec<bool>,
    pub provenance: Matrix,
}

impl BackboneNetwork {
    /// Backbone with unit provenance weights on the given edges.
    pub fn from_edges(nodes: Vec<IndustryId>, edges: &[(usize, usize)]) -> Self {
        let n = nodes.len();
        let mut bb = Self {
            industry: None,
            cluster: None,
            nodes,
            adjacency: vec![false; n * n],
            provenance: Matrix::zeros(n, n),
        };
        for &(i, j) in edges {
            assert!(i != j && i < n && j < n, "invalid backbone edge");
            bb.set(i, j, true);
            bb.provenance[(i, j)] = 1.0;
            bb.provenance[(j, i)] = 1.0;
        }
        bb
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.len() + j]
    }

    fn set(&mut self, i: usize, j: usize, on: bool) {
        let n = self.len();
        self.adjacency[i * n + j] = on;
        self.adjacency[j * n + i] = on;
    }

    /// Edges `(i, j)` with `i < j` in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.has_edge(i, j))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().filter(|&&a| a).count() / 2
    }

    pub fn degrees(&self) -> Vec<usize> {
        let n = self.len();
        (0..n)
            .map(|i| (0..n).filter(|&j| self.has_edge(i, j)).count())
            .collect()
    }

    pub fn adjacency_matrix(&self) -> Matrix {
        let n = self.len();
        Matrix::from_fn(n, n, |i, j| if self.has_edge(i, j) { 1.0 } else { 0.0 })
    }

    fn neighbours(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&j| self.has_edge(i, j))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BackboneMethod {
    /// Noise-corrected filter: keep an edge when its lift score exceeds
    /// `delta` standard deviations.
    NoiseCorrected { delta: f64 },
    /// Disparity filter: keep an edge when it is significant at `alpha` from
    /// at least one endpoint of degree above one.
    Disparity { alpha: f64 },
}

impl Default for BackboneMethod {
    fn default() -> Self {
        BackboneMethod::NoiseCorrected {
            delta: DEFAULT_DELTA,
        }
    }
}

/// Test statistic of one edge under a backbone method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeSignificance {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
    /// Noise-corrected lift score, or the smaller endpoint p-value under the
    /// disparity filter.
    pub score: f64,
    /// Standard deviation of the score; NaN under the disparity filter.
    pub sdev: f64,
    pub kept: bool,
}

/// Per-edge statistics of the chosen filter. A network with a single
/// positive edge keeps it.
pub fn backbone_significance(
    net: &SynergyNetwork,
    method: BackboneMethod,
) -> Result<Vec<EdgeSignificance>, NetworkError> {
    let edges = net.edges();
    if edges.is_empty() {
        return Err(NetworkError::EmptyNetwork);
    }
    let mut out = match method {
        BackboneMethod::NoiseCorrected { delta } => noise_corrected(net, &edges, delta),
        BackboneMethod::Disparity { alpha } => disparity(net, &edges, alpha),
    };
    if out.len() == 1 {
        out[0].kept = true;
    }
    Ok(out)
}

fn noise_corrected(
    net: &SynergyNetwork,
    edges: &[(usize, usize, f64)],
    delta: f64,
) -> Vec<EdgeSignificance> {
    // weights are rescaled to counts with the smallest positive weight as unit
    let unit = edges.iter().map(|e| e.2).fold(f64::INFINITY, f64::min);
    let s: Vec<f64> = net.strengths().iter().map(|v| v / unit).collect();
    // each undirected edge counted in both directions
    let total: f64 = s.iter().sum();
    edges
        .iter()
        .map(|&(i, j, w0)| {
            let w = w0 / unit;
            let (ni, nj) = (s[i], s[j]);
            let kappa = total / (ni * nj);
            let score = (kappa * w - 1.0) / (kappa * w + 1.0);
            let var_prior = (ni * nj * (total - ni) * (total - nj))
                / (total * total * total * total * (total - 1.0));
            let prior_mean = ni * nj / (total * total);
            let alpha_prior = prior_mean * prior_mean / var_prior * (1.0 - prior_mean) - prior_mean;
            let beta_prior =
                prior_mean / var_prior * (1.0 - prior_mean * prior_mean) - (1.0 - prior_mean);
            let alpha_post = alpha_prior + w;
            let beta_post = total - w + beta_prior;
            let expected = alpha_post / (alpha_post + beta_post);
            let var_n = expected * (1.0 - expected) * total;
            let d = 1.0 / (ni * nj) - total * (ni + nj) / ((ni * nj) * (ni * nj));
            let g = 2.0 * (kappa + w * d) / ((kappa * w + 1.0) * (kappa * w + 1.0));
            let sdev = (var_n * g * g).sqrt();
            EdgeSignificance {
                i,
                j,
                weight: w0,
                score,
                sdev,
                kept: score - delta * sdev > 0.0,
            }
        })
        .collect()
}

fn disparity(
    net: &SynergyNetwork,
    edges: &[(usize, usize, f64)],
    alpha: f64,
) -> Vec<EdgeSignificance> {
    let s = net.strengths();
    let k: Vec<usize> = (0..net.len())
        .map(|i| net.weights.row(i).iter().filter(|&&w| w > 0.0).count())
        .collect();
    let p_from = |node: usize, w: f64| -> Option<f64> {
        (k[node] > 1).then(|| (1.0 - w / s[node]).powi(k[node] as i32 - 1))
    };
    edges
        .iter()
        .map(|&(i, j, w)| {
            let p = match (p_from(i, w), p_from(j, w)) {
                (Some(a), Some(b)) => a.min(b),
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => f64::NAN,
            };
            EdgeSignificance {
                i,
                j,
                weight: w,
                score: p,
                sdev: f64::NAN,
                kept: p < alpha,
            }
        })
        .collect()
}

pub fn extract_backbone(
    net: &SynergyNetwork,
    method: BackboneMethod,
) -> Result<BackboneNetwork, NetworkError> {
    let sig = backbone_significance(net, method)?;
    let mut bb = BackboneNetwork::from_edges(net.nodes.clone(), &[]);
    bb.industry = net.industry;
    bb.cluster = net.cluster;
    for e in sig.iter().filter(|e| e.kept) {
        bb.set(e.i, e.j, true);
        bb.provenance[(e.i, e.j)] = e.weight;
        bb.provenance[(e.j, e.i)] = e.weight;
    }
    Ok(bb)
}

/// Largest connected component among nodes accepted by `active`, sorted.
/// Equal sizes resolve to the component holding the lowest node index.
fn largest_component(
    n: usize,
    active: impl Fn(usize) -> bool,
    linked: impl Fn(usize, usize) -> bool,
) -> Vec<usize> {
    let mut seen = vec![false; n];
    let mut best: Vec<usize> = Vec::new();
    for start in 0..n {
        if seen[start] || !active(start) {
            continue;
        }
        let mut comp = vec![start];
        seen[start] = true;
        let mut head = 0;
        while head < comp.len() {
            let u = comp[head];
            head += 1;
            for v in 0..n {
                if !seen[v] && linked(u, v) {
                    seen[v] = true;
                    comp.push(v);
                }
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    best.sort_unstable();
    best
}

/// Unit-norm principal eigenvector of the adjacency restricted to the
/// largest component; other nodes get 0.
pub fn eigenvector_centrality(bb: &BackboneNetwork) -> Result<Vec<f64>, NetworkError> {
    eigenvector_centrality_from(bb, &vec![1.0; bb.len()], CENTRALITY_TOL)
}

/// Power iteration on `A + I` from a given start vector. Entries of `start`
/// outside the largest component are ignored; the start must have positive
/// mass on it.
pub fn eigenvector_centrality_from(
    bb: &BackboneNetwork,
    start: &[f64],
    tol: f64,
) -> Result<Vec<f64>, NetworkError> {
    if bb.edge_count() == 0 {
        return Err(NetworkError::EmptyBackbone);
    }
    let n = bb.len();
    let comp = largest_component(
        n,
        |i| bb.neighbours(i).next().is_some(),
        |i, j| bb.has_edge(i, j),
    );
    let mut x: Vec<f64> = comp.iter().map(|&i| start[i].abs()).collect();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let x0 = norm(&x);
    if !(x0 > 0.0) {
        x = vec![1.0; comp.len()];
    }
    let x0 = norm(&x);
    x.iter_mut().for_each(|v| *v /= x0);
    for _ in 0..CENTRALITY_MAX_ITER {
        let mut y: Vec<f64> = comp
            .iter()
            .enumerate()
            .map(|(a, &i)| {
                x[a] + comp
                    .iter()
                    .enumerate()
                    .filter(|(_, &j)| bb.has_edge(i, j))
                    .map(|(b, _)| x[b])
                    .sum::<f64>()
            })
            .collect();
        let ny = norm(&y);
        y.iter_mut().for_each(|v| *v /= ny);
        let change = y
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        x = y;
        if change <= tol {
            break;
        }
    }
    let mut out = vec![0.0; n];
    for (a, &i) in comp.iter().enumerate() {
        out[i] = x[a];
    }
    Ok(out)
}

/// Local clustering coefficient; nodes of degree below two get 0.
pub fn clustering_coefficients(bb: &BackboneNetwork) -> Vec<f64> {
    (0..bb.len())
        .map(|i| {
            let nb: Vec<usize> = bb.neighbours(i).collect();
            let k = nb.len();
            if k < 2 {
                return 0.0;
            }
            let mut links = 0usize;
            for (a, &u) in nb.iter().enumerate() {
                for &v in &nb[a + 1..] {
                    if bb.has_edge(u, v) {
                        links += 1;
                    }
                }
            }
            2.0 * links as f64 / (k * (k - 1)) as f64
        })
        .collect()
}

/// Largest eigenvalue of a symmetric nonnegative matrix (its spectral
/// radius); 0 for an empty matrix.
pub fn spectral_radius(m: &Matrix) -> f64 {
    if m.rows() == 0 {
        return 0.0;
    }
    let top = symmetric_eigen(m).values[0];
    if top > 0.0 {
        top
    } else {
        0.0
    }
}

/// Node distribution for the network variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NodeDistribution {
    /// Node strength normalized to sum 1.
    #[default]
    Strength,
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkVariance {
    pub value: f64,
    /// Nodes the value was computed on.
    pub component: Vec<usize>,
    /// Set when the positive-strength support was not connected.
    pub disconnected: bool,
}

pub fn network_variance(
    net: &SynergyNetwork,
    dist: NodeDistribution,
) -> Result<NetworkVariance, NetworkError> {
    let p = match dist {
        NodeDistribution::Strength => net.strengths(),
        NodeDistribution::Uniform => vec![1.0; net.len()],
    };
    network_variance_with(net, &p)
}

/// `1/2 sum_ij p_i p_j Omega_ij` with `Omega` the effective resistance of
/// the weighted network on the largest component of its positive-strength
/// support; `p` is restricted to that component and renormalized.
pub fn network_variance_with(
    net: &SynergyNetwork,
    p: &[f64],
) -> Result<NetworkVariance, NetworkError> {
    let n = net.len();
    if p.len() != n || p.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(NetworkError::BadDistribution);
    }
    let s = net.strengths();
    let support = s.iter().filter(|&&v| v > 0.0).count();
    if support == 0 {
        return Err(NetworkError::EmptyNetwork);
    }
    let comp = largest_component(n, |i| s[i] > 0.0, |i, j| net.weights[(i, j)] > 0.0);
    let m = comp.len();
    let mass: f64 = comp.iter().map(|&i| p[i]).sum();
    if !(mass > 0.0) {
        return Err(NetworkError::BadDistribution);
    }
    let q: Vec<f64> = comp.iter().map(|&i| p[i] / mass).collect();
    // L+ = (L + J/m)^-1 - J/m on the connected component
    let inv_m = 1.0 / m as f64;
    let shifted = Matrix::from_fn(m, m, |a, b| {
        let l = if a == b {
            s[comp[a]]
        } else {
            -net.weights[(comp[a], comp[b])]
        };
        l + inv_m
    });
    let inv = shifted.inverse(1e-300).ok_or(NetworkError::BadWeights)?;
    let lp = |a: usize, b: usize| inv[(a, b)] - inv_m;
    let mut value = 0.0;
    for a in 0..m {
        for b in 0..m {
            let omega = lp(a, a) + lp(b, b) - 2.0 * lp(a, b);
            value += q[a] * q[b] * omega;
        }
    }
    Ok(NetworkVariance {
        value: 0.5 * value,
        component: comp,
        disconnected: m < support,
    })
}

/// Mean of positive incident weights per node; 0 for isolated nodes.
pub fn node_mean_synergy(net: &SynergyNetwork) -> Vec<f64> {
    (0..net.len())
        .map(|i| {
            let w: Vec<f64> = net
                .weights
                .row(i)
                .iter()
                .copied()
                .filter(|&w| w > 0.0)
                .collect();
            if w.is_empty() {
                0.0
            } else {
                stats::mean(&w)
            }
        })
        .collect()
}

/// What the spectral radius is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpectralInput {
    #[default]
    Weighted,
    Backbone,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StatsOptions {
    pub spectral: SpectralInput,
    pub distribution: NodeDistribution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkStats {
    pub centrality: Vec<f64>,
    pub clustering: Vec<f64>,
    pub mean_synergy: Vec<f64>,
    pub spectral_radius: f64,
    pub network_variance: f64,
    pub warnings: Vec<String>,
}

/// All per-network statistics. An empty backbone leaves centrality at 0
/// with a warning; an all-zero network has variance NaN.
pub fn network_stats(
    net: &SynergyNetwork,
    bb: &BackboneNetwork,
    opts: StatsOptions,
) -> NetworkStats {
    let mut warnings = Vec::new();
    let centrality = match eigenvector_centrality(bb) {
        Ok(c) => c,
        Err(e) => {
            warnings.push(format!("centrality: {e}"));
            vec![0.0; bb.len()]
        }
    };
    let network_variance = match network_variance(net, opts.distribution) {
        Ok(v) => {
            if v.disconnected {
                warnings.push(format!(
                    "network variance computed on largest component of {} nodes",
                    v.component.len()
                ));
            }
            v.value
        }
        Err(e) => {
            warnings.push(format!("network variance: {e}"));
            f64::NAN
        }
    };
    let spectral_radius = match opts.spectral {
        SpectralInput::Weighted => spectral_radius(&net.weights),
        SpectralInput::Backbone => spectral_radius(&bb.adjacency_matrix()),
    };
    NetworkStats {
        centrality,
        clustering: clustering_coefficients(bb),
        mean_synergy: node_mean_synergy(net),
        spectral_radius,
        network_variance,
        warnings,
    }
}

/// Degree-preserving randomizations of a backbone.
#[derive(Debug, Clone, PartialEq)]
pub struct NullEnsemble {
    pub samples: Vec<BackboneNetwork>,
    pub accepted_swaps: Vec<usize>,
    /// Set when the input has fewer than two edges and samples are copies.
    pub rigid: bool,
}

pub const SWAPS_PER_EDGE: usize = 10;

/// Up to `attempts` double-edge swaps `(a,b),(c,d) -> (a,d),(c,b)`, rejecting
/// self-loops and multi-edges. Returns the number of accepted swaps.
pub fn double_edge_swap<R: Rng>(bb: &mut BackboneNetwork, attempts: usize, rng: &mut R) -> usize {
    let mut edges = bb.edges();
    if edges.len() < 2 {
        return 0;
    }
    let mut accepted = 0;
    for _ in 0..attempts {
        let e1 = rng.random_range(0..edges.len());
        let mut e2 = rng.random_range(0..edges.len() - 1);
        if e2 >= e1 {
            e2 += 1;
        }
        let (a, b) = edges[e1];
        let (mut c, mut d) = edges[e2];
        if rng.random::<bool>() {
            core::mem::swap(&mut c, &mut d);
        }
        if a == d || c == b || bb.has_edge(a, d) || bb.has_edge(c, b) {
            continue;
        }
        bb.set(a, b, false);
        bb.set(c, d, false);
        bb.set(a, d, true);
        bb.set(c, b, true);
        edges[e1] = (a.min(d), a.max(d));
        edges[e2] = (c.min(b), c.max(b));
        accepted += 1;
    }
    accepted
}

/// `samples` independent randomizations, each from the input with
/// `10 * edges` swap attempts and its own generator `sub_seed(seed, s)`.
pub fn null_ensemble(
    bb: &BackboneNetwork,
    samples: usize,
    seed: u64,
) -> Result<NullEnsemble, NetworkError> {
    if samples == 0 {
        return Err(NetworkError::NoSamples);
    }
    let e = bb.edge_count();
    let rigid = e < 2;
    let mut out = Vec::with_capacity(samples);
    let mut accepted_swaps = Vec::with_capacity(samples);
    for s in 0..samples {
        let mut g = BackboneNetwork::from_edges(bb.nodes.clone(), &bb.edges());
        g.industry = bb.industry;
        g.cluster = bb.cluster;
        let mut rng = seed::rng(seed::sub_seed(seed, s as u64));
        accepted_swaps.push(if rigid {
            0
        } else {
            double_edge_swap(&mut g, SWAPS_PER_EDGE * e, &mut rng)
        });
        out.push(g);
    }
    Ok(NullEnsemble {
        samples: out,
        accepted_swaps,
        rigid,
    })
}

/// The ten unordered sector pairs in a fixed order.
pub const SECTOR_PAIRS: [(Sector, Sector); 10] = {
    let a = Sector::ALL;
    [
        (a[0], a[0]),
        (a[0], a[1]),
        (a[0], a[2]),
        (a[0], a[3]),
        (a[1], a[1]),
        (a[1], a[2]),
        (a[1], a[3]),
        (a[2], a[2]),
        (a[2], a[3]),
        (a[3], a[3]),
    ]
};

pub fn sector_pair_index(s: Sector, t: Sector) -> usize {
    let (s, t) = if s <= t { (s, t) } else { (t, s) };
    SECTOR_PAIRS
        .iter()
        .position(|&p| p == (s, t))
        .expect("all pairs listed")
}

/// Fraction of backbone edges per unordered sector pair; `None` without
/// edges.
pub fn sector_mixing(
    bb: &BackboneNetwork,
    sectors: &[Sector],
) -> Result<Option<[f64; 10]>, NetworkError> {
    if sectors.len() < bb.len() {
        return Err(NetworkError::MissingSector(sectors.len()));
    }
    let edges = bb.edges();
    if edges.is_empty() {
        return Ok(None);
    }
    let mut counts = [0.0; 10];
    for &(i, j) in &edges {
        counts[sector_pair_index(sectors[i], sectors[j])] += 1.0;
    }
    let total = edges.len() as f64;
    Ok(Some(counts.map(|c| c / total)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixingRow {
    pub pair: (Sector, Sector),
    pub empirical_mean: f64,
    pub null_mean: f64,
    pub empirical_count: usize,
    pub null_count: usize,
    /// Welch statistic and degrees of freedom; `None` with fewer than two
    /// observations per side or zero variance on both sides.
    pub t: Option<f64>,
    pub df: Option<f64>,
    pub p_value: Option<f64>,
    pub stars: Stars,
}

/// Welch test per sector pair of empirical against null probabilities.
/// Undefined probability records are skipped.
pub fn mixing_ttest(empirical: &[Option<[f64; 10]>], null: &[Option<[f64; 10]>]) -> Vec<MixingRow> {
    let column = |set: &[Option<[f64; 10]>], k: usize| -> Vec<f64> {
        set.iter().flatten().map(|p| p[k]).collect()
    };
    SECTOR_PAIRS
        .iter()
        .enumerate()
        .map(|(k, &pair)| {
            let (e, n) = (column(empirical, k), column(null, k));
            let welch = stats::welch_t(&e, &n);
            let p_value = welch.map(|(t, df)| stats::student_t_two_sided_p(t, df));
            MixingRow {
                pair,
                empirical_mean: stats::mean(&e),
                null_mean: stats::mean(&n),
                empirical_count: e.len(),
                null_count: n.len(),
                t: welch.map(|w| w.0),
                df: welch.map(|w| w.1),
                p_value,
                stars: p_value.map_or(Stars::None, Stars::from_p_value),
            }
        })
        .collect()
}
