//! Gaussian mutual information and the minimum-mutual-information (MMI)
//! partial information decomposition of two inputs about one output.
//!
//! All information quantities are in nats unless a result has been passed
//! through [`to_bits`].

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::iotensor::PooledSample;
use crate::linalg::Matrix;
use crate::seed;

/// Column order of the stacked `[X1, X2, Y]` covariance.
pub const X1: usize = 0;
pub const X2: usize = 1;
pub const Y: usize = 2;

/// MI above this many nats is treated as a deterministic relationship.
pub const MAX_MI_NATS: f64 = 30.0;

/// Negative MI down to this magnitude is rounding noise and clamped to zero.
const NEGATIVE_MI_TOLERANCE: f64 = 1e-12;

pub const DEFAULT_SHUFFLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    X,
    Y,
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Block::X => f.write_str("X"),
            Block::Y => f.write_str("Y"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InfoError {
    #[error("covariance needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("non-finite entry in column {column} row {row}")]
    NonFinite { column: usize, row: usize },
    #[error("index sets must be nonempty, disjoint and within the matrix")]
    BadIndexSets,
    #[error("degenerate input: covariance of the {0} block is singular")]
    SingularBlock(Block),
    #[error("deterministic relationship: conditional covariance is singular (MI exceeds {MAX_MI_NATS} nats)")]
    Deterministic,
    #[error("covariance is not positive semidefinite")]
    NotPositiveSemidefinite,
    #[error("covariance matrix is not symmetric")]
    NotSymmetric,
    #[error("result is already expressed in bits")]
    AlreadyBits,
    #[error("shuffles must be at least 1")]
    NoShuffles,
    #[error("every shuffled surrogate had a degenerate covariance")]
    AllSurrogatesDegenerate,
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(&'static str),
}

/// Covariance of stacked columns plus the number of rows it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSummary {
    pub matrix: Matrix,
    pub sample_count: usize,
}

impl CovarianceSummary {
    /// Wraps a known (e.g. analytic) covariance matrix.
    pub fn from_matrix(matrix: Matrix, sample_count: usize) -> Result<Self, InfoError> {
        if !matrix.is_square() {
            return Err(InfoError::NotSymmetric);
        }
        let scale = matrix
            .as_slice()
            .iter()
            .fold(0.0_f64, |m, x| m.max(x.abs()));
        if matrix.max_abs_asymmetry() > 1e-12 * scale.max(1.0) {
            return Err(InfoError::NotSymmetric);
        }
        if (0..matrix.rows()).any(|i| matrix[(i, i)] < 0.0) {
            return Err(InfoError::NotPositiveSemidefinite);
        }
        Ok(Self {
            matrix,
            sample_count,
        })
    }

    pub fn dimension(&self) -> usize {
        self.matrix.rows()
    }
}

/// Unbiased (n - 1) covariance of the `[X1, X2, Y]` columns.
pub fn covariance_matrix(sample: &PooledSample) -> Result<CovarianceSummary, InfoError> {
    covariance_of_columns(&[&sample.x1, &sample.x2, &sample.y])
}

pub fn covariance_of_columns(columns: &[&[f64]]) -> Result<CovarianceSummary, InfoError> {
    let n = columns.first().map_or(0, |c| c.len());
    if n < 2 {
        return Err(InfoError::TooFewRows(n));
    }
    for (c, col) in columns.iter().enumerate() {
        assert_eq!(col.len(), n, "columns must have equal length");
        if let Some(row) = col.iter().position(|x| !x.is_finite()) {
            return Err(InfoError::NonFinite { column: c, row });
        }
    }
    let means: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().sum::<f64>() / n as f64)
        .collect();
    let d = columns.len();
    let mut m = Matrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let s: f64 = columns[i]
                .iter()
                .zip(columns[j].iter())
                .map(|(a, b)| (a - means[i]) * (b - means[j]))
                .sum();
            let v = s / (n - 1) as f64;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(CovarianceSummary {
        matrix: m,
        sample_count: n,
    })
}

/// `I(X;Y) = 1/2 ln(det S(X) / det S(X|Y))` with the conditional covariance
/// `S(X|Y) = S(X) - S(X,Y) S(Y)^-1 S(Y,X)`.
///
/// The covariance is first rescaled to a correlation matrix; MI is invariant
/// to per-variable scaling and singularity checks then become scale free.
pub fn gaussian_mutual_information(
    cov: &CovarianceSummary,
    x_indices: &[usize],
    y_indices: &[usize],
) -> Result<f64, InfoError> {
    let d = cov.dimension();
    let in_range = |ix: &[usize]| !ix.is_empty() && ix.iter().all(|&i| i < d);
    if !in_range(x_indices)
        || !in_range(y_indices)
        || x_indices.iter().any(|i| y_indices.contains(i))
    {
        return Err(InfoError::BadIndexSets);
    }
    let m = &cov.matrix;
    let sd = |i: usize| {
        let v = m[(i, i)];
        if v > 0.0 && v.is_finite() {
            Some(v.sqrt())
        } else {
            None
        }
    };
    let sd_x: Vec<f64> = x_indices
        .iter()
        .map(|&i| sd(i).ok_or(InfoError::SingularBlock(Block::X)))
        .collect::<Result<_, _>>()?;
    let sd_y: Vec<f64> = y_indices
        .iter()
        .map(|&i| sd(i).ok_or(InfoError::SingularBlock(Block::Y)))
        .collect::<Result<_, _>>()?;
    let corr = |a: &[usize], sa: &[f64], b: &[usize], sb: &[f64]| {
        Matrix::from_fn(a.len(), b.len(), |i, j| m[(a[i], b[j])] / (sa[i] * sb[j]))
    };
    let rx = corr(x_indices, &sd_x, x_indices, &sd_x);
    let ry = corr(y_indices, &sd_y, y_indices, &sd_y);
    let rxy = corr(x_indices, &sd_x, y_indices, &sd_y);

    let min_ln_det = -2.0 * MAX_MI_NATS;
    if !ry.ln_det_spd().is_some_and(|v| v > min_ln_det) {
        return Err(InfoError::SingularBlock(Block::Y));
    }
    let ln_det_x = rx
        .ln_det_spd()
        .filter(|v| *v > min_ln_det)
        .ok_or(InfoError::SingularBlock(Block::X))?;
    let ry_inv = ry
        .inverse(1e-300)
        .ok_or(InfoError::SingularBlock(Block::Y))?;
    let reduction = rxy.mul(&ry_inv).mul(&rxy.transpose());
    // symmetrized against rounding
    let cond = Matrix::from_fn(rx.rows(), rx.cols(), |i, j| {
        0.5 * (rx[(i, j)] - reduction[(i, j)] + rx[(j, i)] - reduction[(j, i)])
    });
    let ln_det_cond = cond.ln_det_spd().ok_or(InfoError::Deterministic)?;
    let mi = 0.5 * (ln_det_x - ln_det_cond);
    if mi > MAX_MI_NATS || !mi.is_finite() {
        return Err(InfoError::Deterministic);
    }
    if mi < 0.0 {
        if mi < -NEGATIVE_MI_TOLERANCE {
            return Err(InfoError::NotPositiveSemidefinite);
        }
        return Ok(0.0);
    }
    Ok(mi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfoUnit {
    Nats,
    Bits,
}

impl InfoUnit {
    pub fn as_str(self) -> &'static str {
        match self {
            InfoUnit::Nats => "nats",
            InfoUnit::Bits => "bits",
        }
    }
}

/// MMI decomposition of `I(X1, X2; Y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidResult {
    pub mi_joint: f64,
    pub mi_x1: f64,
    pub mi_x2: f64,
    pub redundancy: f64,
    pub unique_x1: f64,
    pub unique_x2: f64,
    pub synergy_raw: f64,
    /// Mean synergy of the shuffled surrogates; `None` until bias-corrected.
    pub synergy_bias: Option<f64>,
    pub synergy_corrected: Option<f64>,
    pub unit: InfoUnit,
}

impl PidResult {
    /// Residual of `mi_joint = syn + red + unq1 + unq2`.
    pub fn identity_residual(&self) -> f64 {
        self.mi_joint - (self.synergy_raw + self.redundancy + self.unique_x1 + self.unique_x2)
    }

    /// Corrected synergy when available, raw synergy otherwise.
    pub fn synergy(&self) -> f64 {
        self.synergy_corrected.unwrap_or(self.synergy_raw)
    }
}

/// MMI decomposition from a `[X1, X2, Y]` covariance:
/// `Red = min(I(X1;Y), I(X2;Y))`, `Syn = I(X1,X2;Y) - max(I(X1;Y), I(X2;Y))`.
pub fn pid_mmi(cov: &CovarianceSummary) -> Result<PidResult, InfoError> {
    if cov.dimension() != 3 {
        return Err(InfoError::BadIndexSets);
    }
    let mi_x1 = gaussian_mutual_information(cov, &[X1], &[Y])?;
    let mi_x2 = gaussian_mutual_information(cov, &[X2], &[Y])?;
    let mi_joint = gaussian_mutual_information(cov, &[X1, X2], &[Y])?;
    Ok(decompose(mi_joint, mi_x1, mi_x2))
}

fn decompose(mi_joint: f64, mi_x1: f64, mi_x2: f64) -> PidResult {
    let redundancy = mi_x1.min(mi_x2);
    let unique_x1 = mi_x1 - redundancy;
    let unique_x2 = mi_x2 - redundancy;
    // equals mi_joint - max(mi_x1, mi_x2); written this way so the
    // decomposition identity holds to the last bit
    let synergy_raw = mi_joint - redundancy - unique_x1 - unique_x2;
    PidResult {
        mi_joint,
        mi_x1,
        mi_x2,
        redundancy,
        unique_x1,
        unique_x2,
        synergy_raw,
        synergy_bias: None,
        synergy_corrected: None,
        unit: InfoUnit::Nats,
    }
}

/// PID of the sample with shuffle bias correction: the mean synergy of
/// `shuffles` surrogates (rows of X1 and X2 permuted independently, Y kept)
/// is subtracted from the raw synergy. Surrogate `s` draws from
/// `sub_seed(seed, s)`, so the result is reproducible.
pub fn synergy_score(
    sample: &PooledSample,
    shuffles: usize,
    seed: u64,
) -> Result<PidResult, InfoError> {
    if shuffles == 0 {
        return Err(InfoError::NoShuffles);
    }
    let mut result = pid_mmi(&covariance_matrix(sample)?)?;
    let mut x1 = sample.x1.clone();
    let mut x2 = sample.x2.clone();
    let mut total = 0.0;
    let mut used = 0usize;
    for s in 0..shuffles {
        x1.copy_from_slice(&sample.x1);
        x2.copy_from_slice(&sample.x2);
        let mut rng = seed::rng(seed::sub_seed(seed, s as u64));
        x1.shuffle(&mut rng);
        x2.shuffle(&mut rng);
        let surrogate = covariance_of_columns(&[&x1, &x2, &sample.y]).and_then(|c| pid_mmi(&c));
        if let Ok(r) = surrogate {
            total += r.synergy_raw;
            used += 1;
        }
    }
    if used == 0 {
        return Err(InfoError::AllSurrogatesDegenerate);
    }
    let bias = total / used as f64;
    result.synergy_bias = Some(bias);
    result.synergy_corrected = Some(result.synergy_raw - bias);
    Ok(result)
}

/// Converts every information field from nats to bits.
pub fn to_bits(result: &PidResult) -> Result<PidResult, InfoError> {
    if result.unit == InfoUnit::Bits {
        return Err(InfoError::AlreadyBits);
    }
    let c = core::f64::consts::LN_2;
    Ok(PidResult {
        mi_joint: result.mi_joint / c,
        mi_x1: result.mi_x1 / c,
        mi_x2: result.mi_x2 / c,
        redundancy: result.redundancy / c,
        unique_x1: result.unique_x1 / c,
        unique_x2: result.unique_x2 / c,
        synergy_raw: result.synergy_raw / c,
        synergy_bias: result.synergy_bias.map(|v| v / c),
        synergy_corrected: result.synergy_corrected.map(|v| v / c),
        unit: InfoUnit::Bits,
    })
}

/// Linear-Gaussian generators used as oracles.
#[derive(Debug, Clone, PartialEq)]
pub enum SynthKind {
    /// `Y = a1 X1 + a2 X2 + e`, inputs iid standard normal. Two coefficients.
    SumWithNoise,
    /// `X2 = X1`, `Y = a X1 + e`. One coefficient.
    RedundantDuplicate,
    /// `X1`, `X2` standard normal, `Y = e`. No coefficients.
    Independent,
    /// `[X1, X2, Y] = A z + (0, 0, e)` with `A` given row-major (nine
    /// coefficients) and `z` iid standard normal.
    CustomLinear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub coefficients: Vec<f64>,
    pub noise_variance: f64,
    pub sample_count: usize,
    pub seed: u64,
}

impl SynthSpec {
    pub fn sum_with_noise(
        a1: f64,
        a2: f64,
        noise_variance: f64,
        sample_count: usize,
        seed: u64,
    ) -> Self {
        Self {
            kind: SynthKind::SumWithNoise,
            coefficients: vec![a1, a2],
            noise_variance,
            sample_count,
            seed,
        }
    }

    pub fn independent(noise_variance: f64, sample_count: usize, seed: u64) -> Self {
        Self {
            kind: SynthKind::Independent,
            coefficients: Vec::new(),
            noise_variance,
            sample_count,
            seed,
        }
    }

    fn mixing(&self) -> Result<Matrix, InfoError> {
        let c = &self.coefficients;
        let need = match self.kind {
            SynthKind::SumWithNoise => 2,
            SynthKind::RedundantDuplicate => 1,
            SynthKind::Independent => 0,
            SynthKind::CustomLinear => 9,
        };
        if c.len() != need {
            return Err(InfoError::InvalidSpec(
                "wrong number of coefficients for generator kind",
            ));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(InfoError::InvalidSpec("coefficients must be finite"));
        }
        Ok(match self.kind {
            SynthKind::SumWithNoise => {
                Matrix::from_rows(3, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, c[0], c[1], 0.0])
            }
            SynthKind::RedundantDuplicate => {
                Matrix::from_rows(3, 3, vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0, c[0], 0.0, 0.0])
            }
            SynthKind::Independent => {
                Matrix::from_rows(3, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0])
            }
            SynthKind::CustomLinear => Matrix::from_rows(3, 3, c.clone()),
        })
    }
}

/// Seeded draws from a generator together with its analytic covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSystem {
    pub sample: PooledSample,
    pub analytic: CovarianceSummary,
}

pub fn generate_synthetic_system(spec: &SynthSpec) -> Result<SyntheticSystem, InfoError> {
    if !(spec.noise_variance > 0.0) || !spec.noise_variance.is_finite() {
        return Err(InfoError::InvalidSpec("noise_variance must be positive"));
    }
    if spec.sample_count < 2 {
        return Err(InfoError::InvalidSpec("sample_count must be at least 2"));
    }
    let a = spec.mixing()?;
    let noise_sd = spec.noise_variance.sqrt();
    let n = spec.sample_count;
    let mut rng = seed::rng(spec.seed);
    let (mut x1, mut x2, mut y) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for _ in 0..n {
        let z: [f64; 3] = [
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
        ];
        let e: f64 = StandardNormal.sample(&mut rng);
        let row = a.mul_vec(&z);
        x1.push(row[0]);
        x2.push(row[1]);
        y.push(row[2] + noise_sd * e);
    }
    let mut analytic = a.mul(&a.transpose());
    analytic[(Y, Y)] += spec.noise_variance;
    Ok(SyntheticSystem {
        sample: PooledSample::from_columns(x1, x2, y),
        analytic: CovarianceSummary::from_matrix(analytic, n)?,
    })
}
