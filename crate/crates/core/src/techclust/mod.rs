//! Technology clusters: per-country marginal-product features for one
//! industry, partitioned into balanced groups by size-constrained k-means.

pub mod flow;
pub mod kmeans;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::iotensor::{CountryId, FlowSeries, IndustryId, Registry, Year};
use crate::linalg::Matrix;
use crate::stats;

pub use kmeans::{KMeansOutcome, KMeansParams, DEFAULT_K, DEFAULT_MAX_ITER, DEFAULT_RESTARTS};

pub const DEFAULT_INDICATOR_WEIGHT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusterError {
    #[error("series cover {0} aligned years, need at least 2")]
    TooFewAlignedYears(usize),
    #[error("series belong to different countries or industries")]
    MismatchedSeries,
    #[error("only {0} countries have a defined feature, need at least 2")]
    TooFewCountries(usize),
    #[error("no usable feature column remains")]
    NoColumns,
    #[error("duplicate feature for country {country:?}, input {input:?}")]
    DuplicateFeature {
        country: CountryId,
        input: IndustryId,
    },
    #[error("k must be at least 2, got {0}")]
    TooFewClusters(usize),
    #[error(
        "size bounds [{min_size}, {max_size}] cannot partition {n} countries into {k} clusters"
    )]
    InfeasibleBounds {
        n: usize,
        k: usize,
        min_size: usize,
        max_size: usize,
    },
    #[error("indicator weight must be positive and finite")]
    BadWeight,
}

/// Output change per unit of input change, one entry per consecutive year
/// pair keyed by the later year. `None` where the input did not change.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalProductSeries {
    pub country: CountryId,
    pub industry: IndustryId,
    pub input_industry: IndustryId,
    pub values: Vec<(Year, Option<f64>)>,
}

pub fn marginal_product_series(
    x: &FlowSeries,
    y: &FlowSeries,
) -> Result<MarginalProductSeries, ClusterError> {
    let input_industry = x.input_industry.ok_or(ClusterError::MismatchedSeries)?;
    if x.country != y.country || x.industry != y.industry || y.input_industry.is_some() {
        return Err(ClusterError::MismatchedSeries);
    }
    let first = x.start_year.max(y.start_year);
    let last =
        (x.start_year + x.values.len() as Year).min(y.start_year + y.values.len() as Year) - 1;
    let aligned = if last >= first {
        (last - first + 1) as usize
    } else {
        0
    };
    if aligned < 2 {
        return Err(ClusterError::TooFewAlignedYears(aligned));
    }
    let mut values = Vec::with_capacity(aligned - 1);
    for year in first + 1..=last {
        let dx = x.value_at(year).unwrap_or(f64::NAN) - x.value_at(year - 1).unwrap_or(f64::NAN);
        let dy = y.value_at(year).unwrap_or(f64::NAN) - y.value_at(year - 1).unwrap_or(f64::NAN);
        let mp = if dx != 0.0 && dx.is_finite() && dy.is_finite() {
            Some(dy / dx)
        } else {
            None
        };
        values.push((year, mp));
    }
    Ok(MarginalProductSeries {
        country: x.country,
        industry: x.industry,
        input_industry,
        values,
    })
}

/// Transform applied to the median marginal product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogTransform {
    /// `sgn(m) ln(1 + |m|)`, defined for every real.
    #[default]
    SignedLog1p,
    /// Plain `ln m`, undefined for `m <= 0`.
    Ln,
}

impl LogTransform {
    pub fn apply(self, m: f64) -> Option<f64> {
        match self {
            LogTransform::SignedLog1p => Some(m.signum() * m.abs().ln_1p()),
            LogTransform::Ln if m > 0.0 => Some(m.ln()),
            LogTransform::Ln => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalProductFeature {
    pub country: CountryId,
    pub industry: IndustryId,
    pub input_industry: IndustryId,
    /// `None` when no year pair had a defined marginal product.
    pub mp_median: Option<f64>,
    pub mp_log: Option<f64>,
    pub valid_years: usize,
}

pub fn median_log_mp(
    series: &MarginalProductSeries,
    transform: LogTransform,
) -> MarginalProductFeature {
    let defined: Vec<f64> = series.values.iter().filter_map(|(_, v)| *v).collect();
    let mp_median = stats::median(&defined);
    MarginalProductFeature {
        country: series.country,
        industry: series.industry,
        input_industry: series.input_industry,
        mp_median,
        mp_log: mp_median.and_then(|m| transform.apply(m)),
        valid_years: defined.len(),
    }
}

/// Development indicators averaged over the years each is available.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IndicatorTable {
    values: BTreeMap<String, BTreeMap<CountryId, f64>>,
}

impl IndicatorTable {
    /// Averages every (indicator, country) over its records. Non-finite
    /// values are skipped.
    pub fn from_records<'a>(
        records: impl IntoIterator<Item = (CountryId, Year, &'a str, f64)>,
    ) -> Self {
        let mut acc: BTreeMap<String, BTreeMap<CountryId, (f64, usize)>> = BTreeMap::new();
        for (country, _year, name, value) in records {
            if !value.is_finite() {
                continue;
            }
            let e = acc
                .entry(String::from(name))
                .or_default()
                .entry(country)
                .or_insert((0.0, 0));
            e.0 += value;
            e.1 += 1;
        }
        let values = acc
            .into_iter()
            .map(|(name, m)| {
                (
                    name,
                    m.into_iter().map(|(c, (s, n))| (c, s / n as f64)).collect(),
                )
            })
            .collect();
        Self { values }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    pub fn get(&self, name: &str, country: CountryId) -> Option<f64> {
        self.values.get(name)?.get(&country).copied()
    }
}

/// Standardized country-by-feature matrix. Rows follow country code order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub countries: Vec<CountryId>,
    pub columns: Vec<String>,
    pub values: Matrix,
    /// Row-major; `true` where the value was imputed.
    pub missing: Vec<bool>,
    /// Multiplier applied to each column before clustering.
    pub weights: Vec<f64>,
    pub warnings: Vec<String>,
}

impl FeatureMatrix {
    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.missing[row * self.columns.len() + col]
    }

    /// Values with column weights applied; the space k-means works in.
    pub fn weighted_points(&self) -> Matrix {
        Matrix::from_fn(self.values.rows(), self.values.cols(), |i, j| {
            self.values[(i, j)] * self.weights[j]
        })
    }
}

struct RawColumn {
    name: String,
    weight: f64,
    cells: Vec<Option<f64>>,
}

/// Joins the log-MP features of `industry` (one column per input industry)
/// with indicator columns, standardizes each column with the sample
/// standard deviation and imputes gaps with the column median.
///
/// Columns with fewer than two observed values or zero variance are dropped
/// with a warning.
pub fn build_feature_matrix(
    features: &[MarginalProductFeature],
    indicators: &IndicatorTable,
    registry: &Registry,
    industry: IndustryId,
    indicator_weight: f64,
) -> Result<FeatureMatrix, ClusterError> {
    if !(indicator_weight > 0.0 && indicator_weight.is_finite()) {
        return Err(ClusterError::BadWeight);
    }
    let countries: Vec<CountryId> = registry.countries().collect();
    let n = countries.len();

    let mut mp: BTreeMap<IndustryId, Vec<Option<f64>>> = BTreeMap::new();
    for f in features.iter().filter(|f| f.industry == industry) {
        let cells = mp.entry(f.input_industry).or_insert_with(|| vec![None; n]);
        let slot = &mut cells[f.country.index()];
        if slot.is_some() {
            return Err(ClusterError::DuplicateFeature {
                country: f.country,
                input: f.input_industry,
            });
        }
        *slot = f.mp_log;
    }
    let mut raw: Vec<RawColumn> = mp
        .into_iter()
        .map(|(input, cells)| RawColumn {
            name: format!("mp:{}", registry.industry_code(input)),
            weight: 1.0,
            cells,
        })
        .collect();
    for name in indicators.names() {
        raw.push(RawColumn {
            name: format!("ind:{name}"),
            weight: indicator_weight,
            cells: countries.iter().map(|&c| indicators.get(name, c)).collect(),
        });
    }

    let defined_rows = (0..n)
        .filter(|&i| raw.iter().any(|c| c.cells[i].is_some()))
        .count();
    if defined_rows < 2 {
        return Err(ClusterError::TooFewCountries(defined_rows));
    }

    let mut warnings = Vec::new();
    let mut kept: Vec<(String, f64, Vec<f64>, Vec<bool>)> = Vec::new();
    for col in raw {
        let observed: Vec<f64> = col.cells.iter().filter_map(|v| *v).collect();
        if observed.len() < 2 {
            warnings.push(format!(
                "dropped column {}: {} observed values",
                col.name,
                observed.len()
            ));
            continue;
        }
        let mean = stats::mean(&observed);
        let sd = stats::sample_variance(&observed).sqrt();
        if !(sd > 0.0) || !sd.is_finite() {
            warnings.push(format!("dropped column {}: zero variance", col.name));
            continue;
        }
        let z: Vec<f64> = observed.iter().map(|v| (v - mean) / sd).collect();
        let fill = stats::median(&z).unwrap_or(0.0);
        let mask: Vec<bool> = col.cells.iter().map(Option::is_none).collect();
        let values = col
            .cells
            .iter()
            .map(|v| v.map_or(fill, |v| (v - mean) / sd))
            .collect();
        kept.push((col.name, col.weight, values, mask));
    }
    if kept.is_empty() {
        return Err(ClusterError::NoColumns);
    }
    let m = kept.len();
    let values = Matrix::from_fn(n, m, |i, j| kept[j].2[i]);
    let mut missing = vec![false; n * m];
    for i in 0..n {
        for j in 0..m {
            missing[i * m + j] = kept[j].3[i];
        }
    }
    Ok(FeatureMatrix {
        countries,
        columns: kept.iter().map(|c| c.0.clone()).collect(),
        weights: kept.iter().map(|c| c.1).collect(),
        values,
        missing,
        warnings,
    })
}

/// Cluster label per country for one industry.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub industry: Option<IndustryId>,
    pub k: usize,
    pub labels: BTreeMap<CountryId, usize>,
    pub sizes: Vec<usize>,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
}

impl ClusterAssignment {
    /// Assignment from explicit labels, e.g. one read back from disk.
    /// Labels must lie in `0..k`.
    pub fn from_labels(
        industry: Option<IndustryId>,
        k: usize,
        labels: BTreeMap<CountryId, usize>,
    ) -> Option<Self> {
        let mut sizes = vec![0; k];
        for &l in labels.values() {
            *sizes.get_mut(l)? += 1;
        }
        Some(Self {
            industry,
            k,
            labels,
            sizes,
            objective: f64::NAN,
            converged: true,
            iterations: 0,
            objective_trace: Vec::new(),
        })
    }

    /// Members of a cluster in country code order.
    pub fn members(&self, cluster: usize) -> impl Iterator<Item = CountryId> + '_ {
        self.labels
            .iter()
            .filter(move |(_, &l)| l == cluster)
            .map(|(&c, _)| c)
    }

    pub fn label(&self, country: CountryId) -> Option<usize> {
        self.labels.get(&country).copied()
    }
}

/// Partitions the rows of `features` into `params.k` clusters whose sizes
/// respect the bounds, keeping the best of the seeded restarts.
pub fn constrained_kmeans(
    features: &FeatureMatrix,
    industry: Option<IndustryId>,
    params: &KMeansParams,
) -> Result<ClusterAssignment, ClusterError> {
    let out = kmeans::constrained_kmeans_points(&features.weighted_points(), params)?;
    let labels: BTreeMap<CountryId, usize> = features
        .countries
        .iter()
        .copied()
        .zip(out.labels.iter().copied())
        .collect();
    let mut sizes = vec![0; params.k];
    for &l in &out.labels {
        sizes[l] += 1;
    }
    Ok(ClusterAssignment {
        industry,
        k: params.k,
        labels,
        sizes,
        objective: out.objective,
        converged: out.converged,
        iterations: out.iterations,
        objective_trace: out.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iotensor::{Period, Sector};
    use alloc::string::ToString;

    fn flow(input: Option<u16>, values: &[f64]) -> FlowSeries {
        FlowSeries {
            country: CountryId::new(0),
            industry: IndustryId::new(0),
            input_industry: input.map(IndustryId::new),
            start_year: 2000,
            values: values.to_vec(),
            recorded: vec![true; values.len()],
        }
    }

    #[test]
    fn marginal_products_skip_flat_inputs() {
        let x = flow(Some(1), &[5.0, 6.0, 6.0, 8.0]);
        let y = flow(None, &[10.0, 12.0, 13.0, 13.0]);
        let mp = marginal_product_series(&x, &y).unwrap();
        assert_eq!(
            mp.values,
            vec![(2001, Some(2.0)), (2002, None), (2003, Some(0.0))]
        );
        let short = flow(Some(1), &[1.0]);
        assert_eq!(
            marginal_product_series(&short, &y),
            Err(ClusterError::TooFewAlignedYears(1))
        );
    }

    #[test]
    fn median_and_signed_log() {
        let s = MarginalProductSeries {
            country: CountryId::new(0),
            industry: IndustryId::new(0),
            input_industry: IndustryId::new(1),
            values: vec![
                (2001, Some(1.0)),
                (2002, Some(2.0)),
                (2003, Some(4.0)),
                (2004, None),
            ],
        };
        let f = median_log_mp(&s, LogTransform::SignedLog1p);
        assert_eq!(f.mp_median, Some(2.0));
        assert!((f.mp_log.unwrap() - 3.0_f64.ln()).abs() < 1e-15);
        assert_eq!(f.valid_years, 3);
        let neg = MarginalProductSeries {
            values: vec![(2001, Some(-1.0)), (2002, Some(2.0)), (2003, Some(5.0))],
            ..s.clone()
        };
        assert_eq!(median_log_mp(&neg, LogTransform::Ln).mp_median, Some(2.0));
        let none = MarginalProductSeries {
            values: vec![(2001, None)],
            ..s
        };
        let f = median_log_mp(&none, LogTransform::SignedLog1p);
        assert_eq!((f.mp_median, f.mp_log, f.valid_years), (None, None, 0));
        assert_eq!(LogTransform::Ln.apply(-1.0), None);
        assert!((LogTransform::SignedLog1p.apply(-1.0).unwrap() + 2.0_f64.ln()).abs() < 1e-15);
    }

    fn registry(n: usize) -> Registry {
        Registry::new(
            (0..n).map(|i| format!("C{i:02}")),
            [
                ("AGR".to_string(), Sector::Primary),
                ("TEX".to_string(), Sector::Secondary),
            ],
            Period::new(2000, 2001).unwrap(),
        )
        .unwrap()
    }

    fn feature(country: u16, input: u16, mp_log: Option<f64>) -> MarginalProductFeature {
        MarginalProductFeature {
            country: CountryId::new(country),
            industry: IndustryId::new(1),
            input_industry: IndustryId::new(input),
            mp_median: mp_log,
            mp_log,
            valid_years: usize::from(mp_log.is_some()),
        }
    }

    #[test]
    fn two_point_standardization_uses_sample_sd() {
        let reg = registry(2);
        let fm = build_feature_matrix(
            &[feature(0, 0, Some(0.0)), feature(1, 0, Some(2.0))],
            &IndicatorTable::default(),
            &reg,
            IndustryId::new(1),
            0.5,
        )
        .unwrap();
        assert_eq!(fm.columns, vec!["mp:AGR".to_string()]);
        let h = core::f64::consts::FRAC_1_SQRT_2;
        assert!((fm.values[(0, 0)] + h).abs() < 1e-12);
        assert!((fm.values[(1, 0)] - h).abs() < 1e-12);
    }

    #[test]
    fn constant_columns_drop_and_gaps_impute() {
        let reg = registry(3);
        let feats = [
            feature(0, 0, Some(1.0)),
            feature(1, 0, Some(3.0)),
            feature(2, 0, None),
            feature(0, 1, Some(5.0)),
            feature(1, 1, Some(5.0)),
            feature(2, 1, Some(5.0)),
        ];
        let ind = IndicatorTable::from_records([
            (CountryId::new(0), 2000, "gni", 1.0),
            (CountryId::new(0), 2001, "gni", 3.0),
            (CountryId::new(1), 2000, "gni", 4.0),
            (CountryId::new(2), 2000, "gni", 6.0),
        ]);
        assert_eq!(ind.get("gni", CountryId::new(0)), Some(2.0));
        let fm = build_feature_matrix(&feats, &ind, &reg, IndustryId::new(1), 0.5).unwrap();
        assert_eq!(
            fm.columns,
            vec!["mp:AGR".to_string(), "ind:gni".to_string()]
        );
        assert_eq!(fm.weights, vec![1.0, 0.5]);
        assert_eq!(fm.warnings.len(), 1);
        assert!(fm.is_missing(2, 0) && !fm.is_missing(0, 0));
        // median of the two standardized observed values is their mean, 0
        assert!(fm.values[(2, 0)].abs() < 1e-15);
        let g = [fm.values[(0, 1)], fm.values[(1, 1)], fm.values[(2, 1)]];
        assert!(stats::mean(&g).abs() < 1e-12);
        assert!((stats::sample_variance(&g) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_defined_country_is_rejected() {
        let reg = registry(3);
        let err = build_feature_matrix(
            &[feature(0, 0, Some(1.0))],
            &IndicatorTable::default(),
            &reg,
            IndustryId::new(1),
            0.5,
        );
        assert_eq!(err, Err(ClusterError::TooFewCountries(1)));
    }

    #[test]
    fn separated_corners_split_into_side_pairs() {
        let pts = Matrix::from_rows(4, 2, vec![0.0, 0.0, 0.0, 1.0, 100.0, 0.0, 100.0, 1.0]);
        let params = KMeansParams {
            k: 2,
            min_size: 2,
            max_size: 2,
            seed: 3,
            restarts: 5,
            max_iter: 50,
        };
        let out = kmeans::constrained_kmeans_points(&pts, &params).unwrap();
        assert_eq!(out.labels, vec![0, 0, 1, 1]);
    }

    #[test]
    fn tight_bounds_force_singletons() {
        let pts = Matrix::from_rows(3, 1, vec![1.0, 1.0 + 1e-9, 1.0 + 2e-9]);
        let params = KMeansParams {
            k: 3,
            min_size: 1,
            max_size: 1,
            seed: 0,
            restarts: 3,
            max_iter: 20,
        };
        let out = kmeans::constrained_kmeans_points(&pts, &params).unwrap();
        assert_eq!(out.labels, vec![0, 1, 2]);
    }

    #[test]
    fn infeasible_bounds_are_rejected_early() {
        let pts = Matrix::zeros(5, 1);
        let mut p = KMeansParams::balanced(5, 2, 0);
        p.min_size = 3;
        assert!(matches!(
            kmeans::constrained_kmeans_points(&pts, &p),
            Err(ClusterError::InfeasibleBounds { .. })
        ));
        p.k = 1;
        assert_eq!(
            kmeans::constrained_kmeans_points(&pts, &p),
            Err(ClusterError::TooFewClusters(1))
        );
        assert_eq!(KMeansParams::balanced(40, 4, 0).min_size, 8);
        assert_eq!(KMeansParams::balanced(40, 4, 0).max_size, 12);
    }
}
