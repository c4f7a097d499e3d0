//! Export-based complexity of industries: RCA binarization, the
//! fitness-complexity iteration and the eigenvector (ECI-style) index.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::iotensor::{CountryId, IndustryId, Period, Year};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::stats;

pub const DEFAULT_RCA_THRESHOLD: f64 = 1.0;
pub const DEFAULT_FITNESS_MAX_ITER: usize = 100_000;
pub const DEFAULT_FITNESS_TOL: f64 = 1e-9;
const SPECTRAL_GAP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComplexityError {
    #[error("total exports are not positive")]
    NoExports,
    #[error("binary matrix has an all-zero row or column")]
    ZeroMargin,
    #[error("need at least {0} industries")]
    TooFewIndustries(usize),
    #[error("degenerate structure: no informative second eigenvector")]
    DegenerateStructure,
    #[error("no year to average")]
    NoYears,
    #[error("no industry is scored in every year")]
    EmptyIntersection,
}

/// One row of trade data.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeRecord {
    pub year: Year,
    pub exporter: CountryId,
    pub product: String,
    pub value: f64,
}

/// Trade row that could not be aggregated.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectedTrade {
    pub index: usize,
    pub product: String,
    pub reason: &'static str,
}

/// Exports in USD, countries x industries, for one year.
#[derive(Debug, Clone, PartialEq)]
pub struct ExportMatrix {
    pub year: Year,
    pub countries: Vec<CountryId>,
    pub industries: Vec<IndustryId>,
    pub values: Matrix,
}

/// Sums product exports into industries for every year of `period`. Rows
/// with an unmapped product, a year outside the period, an unknown country
/// or an invalid value are rejected and reported.
pub fn aggregate_exports(
    records: &[TradeRecord],
    mapping: &BTreeMap<String, IndustryId>,
    countries: &[CountryId],
    industries: &[IndustryId],
    period: Period,
) -> (BTreeMap<Year, ExportMatrix>, Vec<RejectedTrade>) {
    let mut out: BTreeMap<Year, ExportMatrix> = period
        .years()
        .map(|year| {
            (
                year,
                ExportMatrix {
                    year,
                    countries: countries.to_vec(),
                    industries: industries.to_vec(),
                    values: Matrix::zeros(countries.len(), industries.len()),
                },
            )
        })
        .collect();
    let mut rejected = Vec::new();
    for (index, r) in records.iter().enumerate() {
        let reject = |reason| RejectedTrade {
            index,
            product: r.product.clone(),
            reason,
        };
        let Some(&industry) = mapping.get(&r.product) else {
            rejected.push(reject("unmapped product"));
            continue;
        };
        let Some(m) = out.get_mut(&r.year) else {
            rejected.push(reject("year outside period"));
            continue;
        };
        if !(r.value >= 0.0) || !r.value.is_finite() {
            rejected.push(reject("invalid value"));
            continue;
        }
        let (Some(i), Some(j)) = (
            countries.iter().position(|&c| c == r.exporter),
            industries.iter().position(|&p| p == industry),
        ) else {
            rejected.push(reject("unknown country or industry"));
            continue;
        };
        m.values[(i, j)] += r.value;
    }
    (out, rejected)
}

/// Binary specialization matrix with the Balassa index it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct RcaMatrix {
    pub year: Year,
    pub countries: Vec<CountryId>,
    pub industries: Vec<IndustryId>,
    pub rca: Matrix,
    /// Entries are 0 or 1.
    pub m: Matrix,
    pub dropped_countries: Vec<CountryId>,
    pub dropped_industries: Vec<IndustryId>,
}

/// `M_cp = 1` iff `RCA_cp >= threshold`; all-zero rows and columns of `M`
/// are dropped and listed.
pub fn rca_binarize(exports: &ExportMatrix, threshold: f64) -> Result<RcaMatrix, ComplexityError> {
    let x = &exports.values;
    let (nc, np) = (x.rows(), x.cols());
    let total: f64 = x.as_slice().iter().sum();
    if !(total > 0.0) {
        return Err(ComplexityError::NoExports);
    }
    let row: Vec<f64> = (0..nc).map(|c| x.row(c).iter().sum()).collect();
    let col: Vec<f64> = (0..np).map(|p| (0..nc).map(|c| x[(c, p)]).sum()).collect();
    let rca = Matrix::from_fn(nc, np, |c, p| {
        if row[c] > 0.0 && col[p] > 0.0 {
            (x[(c, p)] / row[c]) / (col[p] / total)
        } else {
            0.0
        }
    });
    let bin = |c: usize, p: usize| rca[(c, p)] >= threshold;
    let keep_c: Vec<usize> = (0..nc).filter(|&c| (0..np).any(|p| bin(c, p))).collect();
    let keep_p: Vec<usize> = (0..np).filter(|&p| (0..nc).any(|c| bin(c, p))).collect();
    Ok(RcaMatrix {
        year: exports.year,
        countries: keep_c.iter().map(|&c| exports.countries[c]).collect(),
        industries: keep_p.iter().map(|&p| exports.industries[p]).collect(),
        rca: rca.select(&keep_c, &keep_p),
        m: Matrix::from_fn(keep_c.len(), keep_p.len(), |a, b| {
            if bin(keep_c[a], keep_p[b]) {
                1.0
            } else {
                0.0
            }
        }),
        dropped_countries: (0..nc)
            .filter(|c| !keep_c.contains(c))
            .map(|c| exports.countries[c])
            .collect(),
        dropped_industries: (0..np)
            .filter(|p| !keep_p.contains(p))
            .map(|p| exports.industries[p])
            .collect(),
    })
}

fn check_margins(m: &Matrix) -> Result<(), ComplexityError> {
    let (nc, np) = (m.rows(), m.cols());
    let zero_row = (0..nc).any(|c| m.row(c).iter().all(|&v| v == 0.0));
    let zero_col = (0..np).any(|p| (0..nc).all(|c| m[(c, p)] == 0.0));
    if nc == 0 || np == 0 || zero_row || zero_col {
        return Err(ComplexityError::ZeroMargin);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitnessComplexity {
    /// Per country, mean 1.
    pub fitness: Vec<f64>,
    /// Per industry, mean 1.
    pub complexity: Vec<f64>,
    pub iterations: usize,
    /// Largest absolute change of either vector in the last iteration.
    pub residual: f64,
    pub converged: bool,
}

fn normalize_mean_one(v: &mut [f64]) {
    let m = stats::mean(v);
    v.iter_mut().for_each(|x| *x /= m);
}

/// Fitness-complexity iteration from all ones:
/// `F_c <- sum_p M_cp Q_p`, `Q_p <- 1 / sum_c M_cp / F_c`, both rescaled to
/// mean 1, until the largest absolute change is below `tol`. Stops early,
/// unconverged, if an update is no longer finite.
pub fn fitness_complexity(
    m: &Matrix,
    max_iter: usize,
    tol: f64,
) -> Result<FitnessComplexity, ComplexityError> {
    check_margins(m)?;
    let (nc, np) = (m.rows(), m.cols());
    let mut f = vec![1.0; nc];
    let mut q = vec![1.0; np];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut f_next: Vec<f64> = (0..nc)
            .map(|c| (0..np).map(|p| m[(c, p)] * q[p]).sum())
            .collect();
        let mut q_next: Vec<f64> = (0..np)
            .map(|p| 1.0 / (0..nc).map(|c| m[(c, p)] / f[c]).sum::<f64>())
            .collect();
        normalize_mean_one(&mut f_next);
        normalize_mean_one(&mut q_next);
        if f_next.iter().chain(&q_next).any(|x| !x.is_finite()) {
            // fitness underflowed to zero (strongly nested matrix); keep the
            // last finite iterate, which already carries the ranking
            break;
        }
        residual = f_next
            .iter()
            .zip(&f)
            .chain(q_next.iter().zip(&q))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        f = f_next;
        q = q_next;
        if residual < tol {
            break;
        }
    }
    Ok(FitnessComplexity {
        fitness: f,
        complexity: q,
        iterations,
        residual,
        converged: residual < tol,
    })
}

fn standardize_population(v: &[f64]) -> Option<Vec<f64>> {
    let mean = stats::mean(v);
    let sd = stats::population_variance(v).sqrt();
    (sd > 0.0 && sd.is_finite()).then(|| v.iter().map(|x| (x - mean) / sd).collect())
}

/// Industry-side eigenvector index: the eigenvector of the second largest
/// eigenvalue of `(1/k_p) sum_c M_cp M_cp' / k_c`, standardized (population
/// variance) and signed so it correlates negatively with ubiquity `k_p`.
pub fn eci_pci(m: &Matrix) -> Result<Vec<f64>, ComplexityError> {
    check_margins(m)?;
    let (nc, np) = (m.rows(), m.cols());
    if np < 2 {
        return Err(ComplexityError::TooFewIndustries(2));
    }
    let kc: Vec<f64> = (0..nc).map(|c| m.row(c).iter().sum()).collect();
    let kp: Vec<f64> = (0..np).map(|p| (0..nc).map(|c| m[(c, p)]).sum()).collect();
    // symmetric similarity transform D^-1/2 S D^-1/2 of the transition matrix
    let sym = Matrix::from_fn(np, np, |p, r| {
        let s: f64 = (0..nc).map(|c| m[(c, p)] * m[(c, r)] / kc[c]).sum();
        s / (kp[p] * kp[r]).sqrt()
    });
    let eig = symmetric_eigen(&sym);
    let l = &eig.values;
    let gap12 = l[0] - l[1];
    let gap23 = if np > 2 { l[1] - l[2] } else { f64::INFINITY };
    if gap12 < SPECTRAL_GAP_TOL || gap23.abs() < SPECTRAL_GAP_TOL {
        return Err(ComplexityError::DegenerateStructure);
    }
    let raw: Vec<f64> = (0..np)
        .map(|p| eig.vectors[(p, 1)] / kp[p].sqrt())
        .collect();
    let mut z = standardize_population(&raw).ok_or(ComplexityError::DegenerateStructure)?;
    let corr = stats::pearson(&z, &kp);
    let flip = if corr.is_finite() && corr != 0.0 {
        corr > 0.0
    } else {
        // ubiquity carries no sign information: largest magnitude positive
        let (mut best, mut at) = (0.0, 0);
        for (p, v) in z.iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                at = p;
            }
        }
        z[at] < 0.0
    };
    if flip {
        z.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(z)
}

/// Scores of one year, or of the inter-temporal average (`year = None`).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityScores {
    pub year: Option<Year>,
    pub fitness: BTreeMap<CountryId, f64>,
    /// Fitness-complexity industry score.
    pub q: BTreeMap<IndustryId, f64>,
    /// Eigenvector industry score; empty when the structure was degenerate.
    pub eci: BTreeMap<IndustryId, f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub eci_error: Option<ComplexityError>,
}

/// Both indices for one year's RCA matrix.
pub fn complexity_scores(
    rca: &RcaMatrix,
    max_iter: usize,
    tol: f64,
) -> Result<ComplexityScores, ComplexityError> {
    let fc = fitness_complexity(&rca.m, max_iter, tol)?;
    let (eci, eci_error) = match eci_pci(&rca.m) {
        Ok(v) => (rca.industries.iter().copied().zip(v).collect(), None),
        Err(e) => (BTreeMap::new(), Some(e)),
    };
    Ok(ComplexityScores {
        year: Some(rca.year),
        fitness: rca.countries.iter().copied().zip(fc.fitness).collect(),
        q: rca.industries.iter().copied().zip(fc.complexity).collect(),
        eci,
        iterations: fc.iterations,
        residual: fc.residual,
        converged: fc.converged,
        eci_error,
    })
}

/// Averaged scores with the industries and countries left out because some
/// year did not score them.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedScores {
    pub scores: ComplexityScores,
    pub excluded_industries: Vec<IndustryId>,
    pub excluded_countries: Vec<CountryId>,
}

fn intersect_mean<K: Ord + Copy>(maps: &[&BTreeMap<K, f64>]) -> (BTreeMap<K, f64>, BTreeSet<K>) {
    let all: BTreeSet<K> = maps.iter().flat_map(|m| m.keys().copied()).collect();
    let mut mean = BTreeMap::new();
    let mut excluded = BTreeSet::new();
    for k in all {
        let vals: Vec<f64> = maps.iter().filter_map(|m| m.get(&k).copied()).collect();
        if vals.len() == maps.len() {
            mean.insert(k, stats::mean(&vals));
        } else {
            excluded.insert(k);
        }
    }
    (mean, excluded)
}

/// Mean per industry (and per country) over the years, keeping only keys
/// scored in every year. The ECI average uses the years whose ECI was
/// defined, again on the intersection.
pub fn intertemporal_average(
    per_year: &[ComplexityScores],
) -> Result<AveragedScores, ComplexityError> {
    if per_year.is_empty() {
        return Err(ComplexityError::NoYears);
    }
    let (q, excl_q) = intersect_mean(&per_year.iter().map(|s| &s.q).collect::<Vec<_>>());
    if q.is_empty() {
        return Err(ComplexityError::EmptyIntersection);
    }
    let (fitness, excl_c) =
        intersect_mean(&per_year.iter().map(|s| &s.fitness).collect::<Vec<_>>());
    let eci_years: Vec<&BTreeMap<IndustryId, f64>> = per_year
        .iter()
        .filter(|s| s.eci_error.is_none())
        .map(|s| &s.eci)
        .collect();
    let eci = if eci_years.is_empty() {
        BTreeMap::new()
    } else {
        intersect_mean(&eci_years).0
    };
    Ok(AveragedScores {
        scores: ComplexityScores {
            year: None,
            fitness,
            q,
            eci,
            iterations: per_year.iter().map(|s| s.iterations).max().unwrap_or(0),
            residual: per_year.iter().map(|s| s.residual).fold(0.0, f64::max),
            converged: per_year.iter().all(|s| s.converged),
            eci_error: eci_years
                .is_empty()
                .then_some(ComplexityError::DegenerateStructure),
        },
        excluded_industries: excl_q.into_iter().collect(),
        excluded_countries: excl_c.into_iter().collect(),
    })
}
