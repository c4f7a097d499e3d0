//! Multi-region input-output data: registries, transaction and final-demand
//! tables, aggregated flow series, log-fluctuations and pooled samples.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

use crate::techclust::ClusterAssignment;

pub type Year = i32;

/// Index of a country in a [`Registry`]. Registries keep codes sorted, so id
/// order is code order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CountryId(u16);

/// Index of an industry in a [`Registry`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IndustryId(u16);

impl CountryId {
    pub const fn new(index: u16) -> Self {
        Self(index)
    }
    pub fn index(self) -> usize {
        usize::from(self.0)
    }
}

impl IndustryId {
    pub const fn new(index: u16) -> Self {
        Self(index)
    }
    pub fn index(self) -> usize {
        usize::from(self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sector {
    Primary,
    Secondary,
    Tertiary,
    Other,
}

impl Sector {
    pub const ALL: [Sector; 4] = [
        Sector::Primary,
        Sector::Secondary,
        Sector::Tertiary,
        Sector::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Sector::Primary => "primary",
            Sector::Secondary => "secondary",
            Sector::Tertiary => "tertiary",
            Sector::Other => "other",
        }
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sector {
    type Err = RegistryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "primary" => Ok(Sector::Primary),
            "secondary" => Ok(Sector::Secondary),
            "tertiary" => Ok(Sector::Tertiary),
            "other" => Ok(Sector::Other),
            _ => Err(RegistryError::UnknownSector(s.to_string())),
        }
    }
}

/// Inclusive span of covered years.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Period {
    pub start: Year,
    pub end: Year,
}

impl Period {
    pub fn new(start: Year, end: Year) -> Result<Self, RegistryError> {
        if end < start {
            return Err(RegistryError::EmptyPeriod { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn len(&self) -> usize {
        (self.end - self.start + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, year: Year) -> bool {
        (self.start..=self.end).contains(&year)
    }

    pub fn years(&self) -> impl Iterator<Item = Year> {
        self.start..=self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("duplicate country code {0}")]
    DuplicateCountry(String),
    #[error("duplicate industry code {0}")]
    DuplicateIndustry(String),
    #[error("unknown sector label {0:?}")]
    UnknownSector(String),
    #[error("period {start}..={end} is empty")]
    EmptyPeriod { start: Year, end: Year },
    #[error("registry has more than 65535 entries")]
    TooLarge,
}

/// Country and industry code lists, the industry-to-sector map and the
/// covered period.
#[derive(Debug, Clone, PartialEq)]
pub struct Registry {
    countries: Vec<String>,
    industries: Vec<String>,
    sectors: Vec<Sector>,
    period: Period,
}

impl Registry {
    pub fn new(
        countries: impl IntoIterator<Item = String>,
        industries: impl IntoIterator<Item = (String, Sector)>,
        period: Period,
    ) -> Result<Self, RegistryError> {
        let mut countries: Vec<String> = countries.into_iter().collect();
        countries.sort();
        if let Some(w) = countries.windows(2).find(|w| w[0] == w[1]) {
            return Err(RegistryError::DuplicateCountry(w[0].clone()));
        }
        let mut industries: Vec<(String, Sector)> = industries.into_iter().collect();
        industries.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = industries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(RegistryError::DuplicateIndustry(w[0].0.clone()));
        }
        if countries.len() > usize::from(u16::MAX) || industries.len() > usize::from(u16::MAX) {
            return Err(RegistryError::TooLarge);
        }
        let (industries, sectors) = industries.into_iter().unzip();
        Ok(Self {
            countries,
            industries,
            sectors,
            period,
        })
    }

    pub fn period(&self) -> Period {
        self.period
    }

    pub fn country_id(&self, code: &str) -> Option<CountryId> {
        self.countries
            .binary_search_by(|c| c.as_str().cmp(code))
            .ok()
            .map(|i| CountryId(i as u16))
    }

    pub fn industry_id(&self, code: &str) -> Option<IndustryId> {
        self.industries
            .binary_search_by(|c| c.as_str().cmp(code))
            .ok()
            .map(|i| IndustryId(i as u16))
    }

    pub fn country_code(&self, id: CountryId) -> &str {
        &self.countries[id.index()]
    }

    pub fn industry_code(&self, id: IndustryId) -> &str {
        &self.industries[id.index()]
    }

    pub fn sector(&self, id: IndustryId) -> Sector {
        self.sectors[id.index()]
    }

    pub fn countries(&self) -> impl ExactSizeIterator<Item = CountryId> + '_ {
        (0..self.countries.len()).map(|i| CountryId(i as u16))
    }

    pub fn industries(&self) -> impl ExactSizeIterator<Item = IndustryId> + '_ {
        (0..self.industries.len()).map(|i| IndustryId(i as u16))
    }

    pub fn country_count(&self) -> usize {
        self.countries.len()
    }

    pub fn industry_count(&self) -> usize {
        self.industries.len()
    }

    /// Unordered input pairs `(a, b)` with `a < b`. Every registered industry
    /// is an input, including the target industry itself.
    pub fn input_pairs(&self) -> Vec<(IndustryId, IndustryId)> {
        let n = self.industries.len();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for a in 0..n {
            for b in (a + 1)..n {
                out.push((IndustryId(a as u16), IndustryId(b as u16)));
            }
        }
        out
    }
}

/// `T_{i(c'), j(c)}`: industry `i` in `c'` sells `value` to industry `j` in `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransactionRecord {
    pub year: Year,
    pub source_country: CountryId,
    pub source_industry: IndustryId,
    pub dest_country: CountryId,
    pub dest_industry: IndustryId,
    pub value: f64,
}

/// `F_{j(c), c'}`: final demand in `demand_country` for goods of
/// `source_industry` in `source_country`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinalDemandRecord {
    pub year: Year,
    pub source_country: CountryId,
    pub source_industry: IndustryId,
    pub demand_country: CountryId,
    pub value: f64,
}

/// Why a delimited row could not become a record.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RowError {
    #[error("missing field {0}")]
    MissingField(&'static str),
    #[error("field {field} has unparseable value {value:?}")]
    Malformed { field: &'static str, value: String },
    #[error("negative value {0}")]
    NegativeValue(f64),
    #[error("non-finite value")]
    NonFiniteValue,
    #[error("unknown country code {0:?}")]
    UnknownCountry(String),
    #[error("unknown industry code {0:?}")]
    UnknownIndustry(String),
    #[error("year {0} outside the configured period")]
    YearOutOfPeriod(Year),
}

/// Column positions of the six transaction fields in a delimited row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransactionColumns {
    pub year: usize,
    pub source_country: usize,
    pub source_industry: usize,
    pub dest_country: usize,
    pub dest_industry: usize,
    pub value: usize,
}

impl Default for TransactionColumns {
    fn default() -> Self {
        Self {
            year: 0,
            source_country: 1,
            source_industry: 2,
            dest_country: 3,
            dest_industry: 4,
            value: 5,
        }
    }
}

/// Column positions of the five final-demand fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FinalDemandColumns {
    pub year: usize,
    pub source_country: usize,
    pub source_industry: usize,
    pub demand_country: usize,
    pub value: usize,
}

impl Default for FinalDemandColumns {
    fn default() -> Self {
        Self {
            year: 0,
            source_country: 1,
            source_industry: 2,
            demand_country: 3,
            value: 4,
        }
    }
}

fn field<'a>(fields: &[&'a str], idx: usize, name: &'static str) -> Result<&'a str, RowError> {
    fields
        .get(idx)
        .map(|s| s.trim())
        .ok_or(RowError::MissingField(name))
}

fn parse_year(fields: &[&str], idx: usize, period: Period) -> Result<Year, RowError> {
    let raw = field(fields, idx, "year")?;
    let year: Year = raw.parse().map_err(|_| RowError::Malformed {
        field: "year",
        value: raw.to_string(),
    })?;
    if !period.contains(year) {
        return Err(RowError::YearOutOfPeriod(year));
    }
    Ok(year)
}

fn parse_value(fields: &[&str], idx: usize) -> Result<f64, RowError> {
    let raw = field(fields, idx, "value")?;
    let value: f64 = raw.parse().map_err(|_| RowError::Malformed {
        field: "value",
        value: raw.to_string(),
    })?;
    if !value.is_finite() {
        return Err(RowError::NonFiniteValue);
    }
    if value < 0.0 {
        return Err(RowError::NegativeValue(value));
    }
    Ok(value)
}

fn parse_country(
    fields: &[&str],
    idx: usize,
    name: &'static str,
    reg: &Registry,
) -> Result<CountryId, RowError> {
    let raw = field(fields, idx, name)?;
    reg.country_id(raw)
        .ok_or_else(|| RowError::UnknownCountry(raw.to_string()))
}

fn parse_industry(
    fields: &[&str],
    idx: usize,
    name: &'static str,
    reg: &Registry,
) -> Result<IndustryId, RowError> {
    let raw = field(fields, idx, name)?;
    reg.industry_id(raw)
        .ok_or_else(|| RowError::UnknownIndustry(raw.to_string()))
}

impl TransactionRecord {
    pub fn from_fields(
        fields: &[&str],
        cols: &TransactionColumns,
        reg: &Registry,
    ) -> Result<Self, RowError> {
        Ok(Self {
            year: parse_year(fields, cols.year, reg.period())?,
            source_country: parse_country(fields, cols.source_country, "source_country", reg)?,
            source_industry: parse_industry(fields, cols.source_industry, "source_industry", reg)?,
            dest_country: parse_country(fields, cols.dest_country, "dest_country", reg)?,
            dest_industry: parse_industry(fields, cols.dest_industry, "dest_industry", reg)?,
            value: parse_value(fields, cols.value)?,
        })
    }
}

impl FinalDemandRecord {
    pub fn from_fields(
        fields: &[&str],
        cols: &FinalDemandColumns,
        reg: &Registry,
    ) -> Result<Self, RowError> {
        Ok(Self {
            year: parse_year(fields, cols.year, reg.period())?,
            source_country: parse_country(fields, cols.source_country, "source_country", reg)?,
            source_industry: parse_industry(fields, cols.source_industry, "source_industry", reg)?,
            demand_country: parse_country(fields, cols.demand_country, "demand_country", reg)?,
            value: parse_value(fields, cols.value)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct Cell {
    value: f64,
    records: u32,
}

impl Cell {
    fn add(&mut self, v: f64) {
        self.value += v;
        self.records += 1;
    }
}

/// Transactions of one period, indexed for per-series aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct TransactionTable {
    period: Period,
    records: Vec<TransactionRecord>,
    // (dest country, dest industry, source industry, year)
    inflow: BTreeMap<(CountryId, IndustryId, IndustryId, Year), Cell>,
    // (source country, source industry, year)
    sales: BTreeMap<(CountryId, IndustryId, Year), Cell>,
}

impl TransactionTable {
    pub fn new(period: Period) -> Self {
        Self {
            period,
            records: Vec::new(),
            inflow: BTreeMap::new(),
            sales: BTreeMap::new(),
        }
    }

    pub fn from_records(
        period: Period,
        records: impl IntoIterator<Item = TransactionRecord>,
    ) -> Self {
        let mut t = Self::new(period);
        for r in records {
            t.push(r);
        }
        t
    }

    /// Adds a record. Records outside the period are ignored by aggregation
    /// but kept for provenance.
    pub fn push(&mut self, r: TransactionRecord) {
        self.inflow
            .entry((r.dest_country, r.dest_industry, r.source_industry, r.year))
            .or_default()
            .add(r.value);
        self.sales
            .entry((r.source_country, r.source_industry, r.year))
            .or_default()
            .add(r.value);
        self.records.push(r);
    }

    pub fn period(&self) -> Period {
        self.period
    }

    pub fn records(&self) -> &[TransactionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `X_{i,j}(c) = sum_{c'} T_{i(c'), j(c)}` for every year of the period.
    /// Years without records are present with value 0 and `recorded = false`.
    pub fn total_input_inflow(
        &self,
        input_industry: IndustryId,
        industry: IndustryId,
        country: CountryId,
    ) -> FlowSeries {
        let mut values = Vec::with_capacity(self.period.len());
        let mut recorded = Vec::with_capacity(self.period.len());
        for year in self.period.years() {
            let cell = self
                .inflow
                .get(&(country, industry, input_industry, year))
                .copied()
                .unwrap_or_default();
            values.push(cell.value);
            recorded.push(cell.records > 0);
        }
        FlowSeries {
            country,
            industry,
            input_industry: Some(input_industry),
            start_year: self.period.start,
            values,
            recorded,
        }
    }

    /// `Y_j(c) = sum_{c', i} T_{j(c), i(c')} + sum_{c'} F_{j(c), c'}`.
    pub fn total_output(
        &self,
        demand: &FinalDemandTable,
        industry: IndustryId,
        country: CountryId,
    ) -> FlowSeries {
        let mut values = Vec::with_capacity(self.period.len());
        let mut recorded = Vec::with_capacity(self.period.len());
        for year in self.period.years() {
            let key = (country, industry, year);
            let s = self.sales.get(&key).copied().unwrap_or_default();
            let d = demand.totals.get(&key).copied().unwrap_or_default();
            values.push(s.value + d.value);
            recorded.push(s.records + d.records > 0);
        }
        FlowSeries {
            country,
            industry,
            input_industry: None,
            start_year: self.period.start,
            values,
            recorded,
        }
    }
}

/// Final-demand records indexed by (source country, source industry, year).
#[derive(Debug, Clone, PartialEq)]
pub struct FinalDemandTable {
    records: Vec<FinalDemandRecord>,
    totals: BTreeMap<(CountryId, IndustryId, Year), Cell>,
}

impl FinalDemandTable {
    pub fn new() -> Self {
        Self {
            records: Vec::new(),
            totals: BTreeMap::new(),
        }
    }

    pub fn from_records(records: impl IntoIterator<Item = FinalDemandRecord>) -> Self {
        let mut t = Self::new();
        for r in records {
            t.push(r);
        }
        t
    }

    pub fn push(&mut self, r: FinalDemandRecord) {
        self.totals
            .entry((r.source_country, r.source_industry, r.year))
            .or_default()
            .add(r.value);
        self.records.push(r);
    }

    pub fn records(&self) -> &[FinalDemandRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl Default for FinalDemandTable {
    fn default() -> Self {
        Self::new()
    }
}

/// Identifies an input series (`input = Some(i)`) or the output series of an
/// industry in a country.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SeriesKey {
    pub country: CountryId,
    pub industry: IndustryId,
    pub input: Option<IndustryId>,
}

/// Yearly flow in USD over a contiguous span of years.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSeries {
    pub country: CountryId,
    pub industry: IndustryId,
    pub input_industry: Option<IndustryId>,
    pub start_year: Year,
    pub values: Vec<f64>,
    /// `false` marks a present-zero year: covered, but no record contributed.
    pub recorded: Vec<bool>,
}

impl FlowSeries {
    pub fn key(&self) -> SeriesKey {
        SeriesKey {
            country: self.country,
            industry: self.industry,
            input: self.input_industry,
        }
    }

    pub fn years(&self) -> impl Iterator<Item = Year> + '_ {
        (0..self.values.len()).map(move |i| self.start_year + i as Year)
    }

    pub fn value_at(&self, year: Year) -> Option<f64> {
        let i = year.checked_sub(self.start_year)?;
        self.values.get(usize::try_from(i).ok()?).copied()
    }

    /// Divides each year's value by the deflator index of `(country, year)`.
    /// Years without a deflator entry are left unchanged.
    pub fn deflated(&self, deflator: &Deflator) -> FlowSeries {
        let mut out = self.clone();
        for (i, year) in self.years().enumerate() {
            if let Some(f) = deflator.factor(self.country, year) {
                out.values[i] /= f;
            }
        }
        out
    }
}

/// Optional price index per (country, year). Off by default in the pipeline.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Deflator {
    factors: BTreeMap<(CountryId, Year), f64>,
}

impl Deflator {
    pub fn insert(&mut self, country: CountryId, year: Year, factor: f64) {
        self.factors.insert((country, year), factor);
    }

    pub fn factor(&self, country: CountryId, year: Year) -> Option<f64> {
        self.factors
            .get(&(country, year))
            .copied()
            .filter(|f| *f > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FluctuationError {
    #[error("series has {0} years; log-fluctuations need at least 2")]
    TooShort(usize),
}

/// Natural-log growth rates between consecutive years. Entry `t` covers the
/// pair `(start_year + t - 1, start_year + t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationSeries {
    pub country: CountryId,
    pub industry: IndustryId,
    pub input_industry: Option<IndustryId>,
    /// Year of the first entry (the later year of the first pair).
    pub start_year: Year,
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl FluctuationSeries {
    pub fn key(&self) -> SeriesKey {
        SeriesKey {
            country: self.country,
            industry: self.industry,
            input: self.input_industry,
        }
    }

    pub fn get(&self, year: Year) -> Option<f64> {
        let i = usize::try_from(year.checked_sub(self.start_year)?).ok()?;
        match (self.values.get(i), self.valid.get(i)) {
            (Some(&v), Some(true)) => Some(v),
            _ => None,
        }
    }

    pub fn end_year(&self) -> Year {
        self.start_year + self.values.len() as Year - 1
    }
}

/// `ln(X^t / X^{t-1})` per consecutive pair. Pairs touching a nonpositive
/// flow are invalid (value stored as NaN).
pub fn log_fluctuations(series: &FlowSeries) -> Result<FluctuationSeries, FluctuationError> {
    let n = series.values.len();
    if n < 2 {
        return Err(FluctuationError::TooShort(n));
    }
    let mut values = Vec::with_capacity(n - 1);
    let mut valid = Vec::with_capacity(n - 1);
    for w in series.values.windows(2) {
        let (prev, cur) = (w[0], w[1]);
        if prev > 0.0 && cur > 0.0 && prev.is_finite() && cur.is_finite() {
            values.push((cur / prev).ln());
            valid.push(true);
        } else {
            values.push(f64::NAN);
            valid.push(false);
        }
    }
    Ok(FluctuationSeries {
        country: series.country,
        industry: series.industry,
        input_industry: series.input_industry,
        start_year: series.start_year + 1,
        values,
        valid,
    })
}

/// Fluctuation series keyed by (country, industry, input).
pub type FluctuationSet = BTreeMap<SeriesKey, FluctuationSeries>;

/// Industry and unordered input pair a pooled sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SampleKey {
    pub industry: IndustryId,
    pub pair: (IndustryId, IndustryId),
}

/// Aligned `(X1, X2, Y)` observations.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledSample {
    pub key: Option<SampleKey>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub y: Vec<f64>,
    pub provenance: Vec<(CountryId, Year)>,
    /// Set when the sample has fewer rows than the configured minimum.
    pub below_minimum: bool,
}

impl PooledSample {
    /// Sample without industry provenance (synthetic systems, tests).
    pub fn from_columns(x1: Vec<f64>, x2: Vec<f64>, y: Vec<f64>) -> Self {
        assert!(
            x1.len() == x2.len() && x2.len() == y.len(),
            "pooled columns must have equal length"
        );
        Self {
            key: None,
            x1,
            x2,
            y,
            provenance: Vec::new(),
            below_minimum: false,
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Rows below which a pooled sample is flagged.
pub const DEFAULT_MIN_ROWS: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PoolError {
    #[error(
        "no fluctuation series for country {country:?}, industry {industry:?}, input {input:?}"
    )]
    MissingSeries {
        country: CountryId,
        industry: IndustryId,
        input: Option<IndustryId>,
    },
}

fn lookup(set: &FluctuationSet, key: SeriesKey) -> Result<&FluctuationSeries, PoolError> {
    set.get(&key).ok_or(PoolError::MissingSeries {
        country: key.country,
        industry: key.industry,
        input: key.input,
    })
}

/// Collates the `(X_a, X_b, Y)` fluctuations of `industry` over all
/// countries of one cluster. Rows are ordered by country code, then year,
/// and only kept when all three fluctuations are valid.
pub fn pool_cluster_samples(
    fluct: &FluctuationSet,
    assignment: &ClusterAssignment,
    cluster: usize,
    industry: IndustryId,
    pair: (IndustryId, IndustryId),
    min_rows: usize,
) -> Result<PooledSample, PoolError> {
    let mut sample = PooledSample {
        key: Some(SampleKey { industry, pair }),
        x1: Vec::new(),
        x2: Vec::new(),
        y: Vec::new(),
        provenance: Vec::new(),
        below_minimum: false,
    };
    for country in assignment.members(cluster) {
        let s1 = lookup(
            fluct,
            SeriesKey {
                country,
                industry,
                input: Some(pair.0),
            },
        )?;
        let s2 = lookup(
            fluct,
            SeriesKey {
                country,
                industry,
                input: Some(pair.1),
            },
        )?;
        let sy = lookup(
            fluct,
            SeriesKey {
                country,
                industry,
                input: None,
            },
        )?;
        let first = s1.start_year.max(s2.start_year).max(sy.start_year);
        let last = s1.end_year().min(s2.end_year()).min(sy.end_year());
        for year in first..=last {
            if let (Some(a), Some(b), Some(y)) = (s1.get(year), s2.get(year), sy.get(year)) {
                sample.x1.push(a);
                sample.x2.push(b);
                sample.y.push(y);
                sample.provenance.push((country, year));
            }
        }
    }
    sample.below_minimum = sample.len() < min_rows;
    Ok(sample)
}
