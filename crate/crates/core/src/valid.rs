//! OLS with cluster-robust standard errors, log-synergy flooring and binned
//! scatter summaries.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::linalg::{least_squares, Matrix};
use crate::stats::{self, Stars};

pub const DEFAULT_LOG_FLOOR: f64 = 1e-9;
pub const DEFAULT_BINS: usize = 30;
/// Name of the intercept row in regression output.
pub const INTERCEPT: &str = "intercept";
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidError {
    #[error("column {0} not found")]
    MissingColumn(String),
    #[error("column {0} has a different length")]
    LengthMismatch(String),
    #[error("column {column} has a non-finite value at row {row}")]
    NonFinite { column: String, row: usize },
    #[error("no regressors")]
    NoRegressors,
    #[error("{n} observations cannot identify {k} coefficients")]
    TooFewObservations { n: usize, k: usize },
    #[error("cluster-robust errors need at least 2 clusters")]
    SingleCluster,
    #[error("column {0} is collinear with earlier columns")]
    RankDeficient(String),
    #[error("floor must be positive")]
    BadFloor,
    #[error("need at least 2 bins")]
    TooFewBins,
    #[error("x is constant")]
    ConstantX,
}

/// Observation table: numeric columns and the labels used for clustering.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DataTable {
    pub numeric: BTreeMap<String, Vec<f64>>,
    pub labels: BTreeMap<String, Vec<String>>,
}

impl DataTable {
    pub fn with_numeric(mut self, name: &str, values: Vec<f64>) -> Self {
        self.numeric.insert(name.to_string(), values);
        self
    }

    pub fn with_labels(mut self, name: &str, values: Vec<String>) -> Self {
        self.labels.insert(name.to_string(), values);
        self
    }

    fn column(&self, name: &str) -> Result<&[f64], ValidError> {
        self.numeric
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| ValidError::MissingColumn(name.to_string()))
    }

    /// Cluster keys from a label column or, failing that, a numeric one.
    fn groups(&self, name: &str) -> Result<Vec<String>, ValidError> {
        if let Some(l) = self.labels.get(name) {
            return Ok(l.clone());
        }
        let v = self.column(name)?;
        Ok(v.iter().map(|x| alloc::format!("{x:?}")).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSpec {
    pub dependent: String,
    pub regressors: Vec<String>,
    pub cluster_column: String,
    pub intercept: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionResult {
    /// Regressors in the order given, then the intercept if present.
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub stars: Vec<Stars>,
    pub r2: f64,
    pub adj_r2: f64,
    pub rss: f64,
    pub observations: usize,
    pub clusters: usize,
}

impl RegressionResult {
    pub fn get(&self, name: &str) -> Option<(f64, f64, Stars)> {
        let i = self.names.iter().position(|n| n == name)?;
        Some((self.coefficients[i], self.std_errors[i], self.stars[i]))
    }
}

/// OLS by Householder QR with Liang-Zeger cluster-robust covariance scaled
/// by `G/(G-1) (n-1)/(n-k)`. p-values use a t distribution with `G - 1`
/// degrees of freedom.
pub fn ols_cluster(
    data: &DataTable,
    spec: &RegressionSpec,
) -> Result<RegressionResult, ValidError> {
    if spec.regressors.is_empty() {
        return Err(ValidError::NoRegressors);
    }
    let y = data.column(&spec.dependent)?;
    let n = y.len();
    // intercept first so a collinear dummy set is reported by its own name
    let mut names: Vec<String> = Vec::new();
    let mut cols: Vec<&[f64]> = Vec::new();
    let ones = vec![1.0; n];
    if spec.intercept {
        names.push(INTERCEPT.to_string());
        cols.push(&ones);
    }
    for r in &spec.regressors {
        let c = data.column(r)?;
        if c.len() != n {
            return Err(ValidError::LengthMismatch(r.clone()));
        }
        names.push(r.clone());
        cols.push(c);
    }
    for (name, c) in names.iter().zip(&cols).chain([(&spec.dependent, &y)]) {
        if let Some(row) = c.iter().position(|v| !v.is_finite()) {
            return Err(ValidError::NonFinite {
                column: name.clone(),
                row,
            });
        }
    }
    let groups = data.groups(&spec.cluster_column)?;
    if groups.len() != n {
        return Err(ValidError::LengthMismatch(spec.cluster_column.clone()));
    }
    let k = cols.len();
    if n <= k {
        return Err(ValidError::TooFewObservations { n, k });
    }
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for g in &groups {
        let next = index.len();
        index.entry(g.as_str()).or_insert(next);
    }
    let g_count = index.len();
    if g_count < 2 {
        return Err(ValidError::SingleCluster);
    }

    let x = Matrix::from_fn(n, k, |i, j| cols[j][i]);
    let ls = least_squares(&x, y, RANK_TOL)
        .map_err(|e| ValidError::RankDeficient(names[e.column].clone()))?;
    let beta = ls.coefficients;
    let resid: Vec<f64> = (0..n)
        .map(|i| y[i] - (0..k).map(|j| x[(i, j)] * beta[j]).sum::<f64>())
        .collect();

    // meat: sum over clusters of (X_g' u_g)(X_g' u_g)'
    let mut scores = vec![vec![0.0; k]; g_count];
    for i in 0..n {
        let g = index[groups[i].as_str()];
        for j in 0..k {
            scores[g][j] += x[(i, j)] * resid[i];
        }
    }
    let meat = Matrix::from_fn(k, k, |a, b| scores.iter().map(|s| s[a] * s[b]).sum());
    let gf = g_count as f64;
    let (nf, kf) = (n as f64, k as f64);
    let c = gf / (gf - 1.0) * (nf - 1.0) / (nf - kf);
    let bread = &ls.xtx_inverse;
    let vcov = bread.mul(&meat).mul(bread).scale(c);

    let rss: f64 = resid.iter().map(|r| r * r).sum();
    let tss: f64 = if spec.intercept {
        let m = stats::mean(y);
        y.iter().map(|v| (v - m) * (v - m)).sum()
    } else {
        y.iter().map(|v| v * v).sum()
    };
    let r2 = 1.0 - rss / tss;
    let dof_total = if spec.intercept { nf - 1.0 } else { nf };
    let adj_r2 = 1.0 - (1.0 - r2) * dof_total / (nf - kf);

    let se: Vec<f64> = (0..k).map(|j| vcov[(j, j)].max(0.0).sqrt()).collect();
    let t: Vec<f64> = (0..k).map(|j| beta[j] / se[j]).collect();
    let p: Vec<f64> = t
        .iter()
        .map(|&t| stats::student_t_two_sided_p(t, gf - 1.0))
        .collect();

    // report regressors first, intercept last
    let order: Vec<usize> = if spec.intercept {
        (1..k).chain([0]).collect()
    } else {
        (0..k).collect()
    };
    let pick = |v: &[f64]| order.iter().map(|&j| v[j]).collect::<Vec<f64>>();
    Ok(RegressionResult {
        names: order.iter().map(|&j| names[j].clone()).collect(),
        coefficients: pick(&beta),
        std_errors: pick(&se),
        t_values: pick(&t),
        stars: order.iter().map(|&j| Stars::from_p_value(p[j])).collect(),
        p_values: pick(&p),
        r2,
        adj_r2,
        rss,
        observations: n,
        clusters: g_count,
    })
}

/// `ln(max(v, floor))` per value, with the number of floored values.
pub fn log_synergy(values: &[f64], floor: f64) -> Result<(Vec<f64>, usize), ValidError> {
    if !(floor > 0.0) || !floor.is_finite() {
        return Err(ValidError::BadFloor);
    }
    let mut floored = 0;
    let out = values
        .iter()
        .map(|&v| {
            if v >= floor {
                v.ln()
            } else {
                floored += 1;
                floor.ln()
            }
        })
        .collect();
    Ok((out, floored))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bin {
    pub lower: f64,
    pub upper: f64,
    pub mean_x: f64,
    pub mean_y: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinnedScatter {
    pub bins: Vec<Bin>,
    /// Least-squares line through the unbinned data.
    pub slope: f64,
    pub intercept: f64,
}

/// Equal-count bins over `x` sorted ascending (the first `n mod bins` bins
/// hold one extra point); fewer bins are used when `n < bins`.
pub fn binned_scatter(x: &[f64], y: &[f64], bins: usize) -> Result<BinnedScatter, ValidError> {
    if bins < 2 {
        return Err(ValidError::TooFewBins);
    }
    if x.len() != y.len() {
        return Err(ValidError::LengthMismatch("y".to_string()));
    }
    if let Some(row) = x.iter().chain(y).position(|v| !v.is_finite()) {
        return Err(ValidError::NonFinite {
            column: if row < x.len() { "x" } else { "y" }.to_string(),
            row: row % x.len().max(1),
        });
    }
    let n = x.len();
    let var_x = stats::population_variance(x);
    if n < 2 || !(var_x > 0.0) {
        return Err(ValidError::ConstantX);
    }
    let (mx, my) = (stats::mean(x), stats::mean(y));
    let cov: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / n as f64;
    let slope = cov / var_x;
    let intercept = my - slope * mx;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let b = bins.min(n);
    let (base, extra) = (n / b, n % b);
    let mut out = Vec::with_capacity(b);
    let mut start = 0;
    for i in 0..b {
        let len = base + usize::from(i < extra);
        let idx = &order[start..start + len];
        let xs: Vec<f64> = idx.iter().map(|&k| x[k]).collect();
        let ys: Vec<f64> = idx.iter().map(|&k| y[k]).collect();
        out.push(Bin {
            lower: xs[0],
            upper: xs[len - 1],
            mean_x: stats::mean(&xs),
            mean_y: stats::mean(&ys),
            count: len,
        });
        start += len;
    }
    Ok(BinnedScatter {
        bins: out,
        slope,
        intercept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_data_bins() {
        let v = [1.0, 2.0, 3.0, 4.0];
        let b = binned_scatter(&v, &v, 2).unwrap();
        assert_eq!((b.bins[0].mean_x, b.bins[0].mean_y), (1.5, 1.5));
        assert_eq!((b.bins[1].mean_x, b.bins[1].mean_y), (3.5, 3.5));
        assert!((b.slope - 1.0).abs() < 1e-15);
        assert_eq!(
            binned_scatter(&[1.0, 1.0], &v[..2], 2),
            Err(ValidError::ConstantX)
        );
    }

    #[test]
    fn log_floor_counts() {
        let (v, floored) = log_synergy(&[core::f64::consts::E, -0.01, 0.0], 1e-9).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-15);
        assert_eq!(v[1], 1e-9_f64.ln());
        assert_eq!(v[2], 1e-9_f64.ln());
        assert_eq!(floored, 2);
    }

    #[test]
    fn perfect_fit() {
        let x: Vec<f64> = (0..8).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let g: Vec<String> = (0..8).map(|i| (i % 3).to_string()).collect();
        let data = DataTable::default()
            .with_numeric("y", y)
            .with_numeric("x", x)
            .with_labels("g", g);
        let spec = RegressionSpec {
            dependent: "y".into(),
            regressors: vec!["x".into()],
            cluster_column: "g".into(),
            intercept: true,
        };
        let r = ols_cluster(&data, &spec).unwrap();
        let (b, se, _) = r.get("x").unwrap();
        assert!((b - 2.0).abs() < 1e-12 && se < 1e-12);
        assert!((r.adj_r2 - 1.0).abs() < 1e-12);
        assert_eq!(r.names, vec!["x".to_string(), INTERCEPT.to_string()]);
    }
}
