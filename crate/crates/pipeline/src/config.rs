//! Run configuration: one JSON document, every field defaulted except the
//! registries and the period. Relative paths resolve against the directory
//! of the config file.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Deserializer, Serialize};
use synergy_core::iotensor::{Period, Sector};
use synergy_core::{ecx, gpid, iotensor, synnet, techclust, valid};

use crate::error::{invalid, PipelineError};
use crate::stages::Stage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub inputs: Inputs,
    #[serde(default)]
    pub schema: Schema,
    pub period: PeriodConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads for per-task parallelism; `None` uses all cores.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub cluster: ClusterConfig,
    #[serde(default)]
    pub synergy: SynergyConfig,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub complexity: ComplexityConfig,
    #[serde(default)]
    pub regress: RegressConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("artifacts")
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub countries: PathBuf,
    pub industries: PathBuf,
    #[serde(default)]
    pub sector_map: Option<PathBuf>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub transactions: Vec<PathBuf>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub final_demand: Vec<PathBuf>,
    #[serde(default)]
    pub indicators: Option<PathBuf>,
    #[serde(default)]
    pub trade: Option<PathBuf>,
    #[serde(default)]
    pub product_mapping: Option<PathBuf>,
    #[serde(default)]
    pub deflator: Option<PathBuf>,
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<PathBuf>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(PathBuf),
        Many(Vec<PathBuf>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(p) => vec![p],
        OneOrMany::Many(v) => v,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Delimiter {
    /// Tab for `.tsv` files or a tab-separated header line, comma otherwise.
    #[default]
    Auto,
    Comma,
    Tab,
}

/// A column given by header name or zero-based position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl From<&str> for ColumnRef {
    fn from(s: &str) -> Self {
        ColumnRef::Name(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransactionSchema {
    pub year: ColumnRef,
    pub source_country: ColumnRef,
    pub source_industry: ColumnRef,
    pub dest_country: ColumnRef,
    pub dest_industry: ColumnRef,
    pub value: ColumnRef,
}

impl Default for TransactionSchema {
    fn default() -> Self {
        Self {
            year: "year".into(),
            source_country: "source_country".into(),
            source_industry: "source_industry".into(),
            dest_country: "dest_country".into(),
            dest_industry: "dest_industry".into(),
            value: "value".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FinalDemandSchema {
    pub year: ColumnRef,
    pub source_country: ColumnRef,
    pub source_industry: ColumnRef,
    pub demand_country: ColumnRef,
    pub value: ColumnRef,
}

impl Default for FinalDemandSchema {
    fn default() -> Self {
        Self {
            year: "year".into(),
            source_country: "source_country".into(),
            source_industry: "source_industry".into(),
            demand_country: "demand_country".into(),
            value: "value".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Schema {
    pub delimiter: Delimiter,
    /// When false, the transaction and final-demand files have no header
    /// row and their columns must be given by position.
    pub has_headers: bool,
    pub transactions: TransactionSchema,
    pub final_demand: FinalDemandSchema,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            delimiter: Delimiter::Auto,
            has_headers: true,
            transactions: TransactionSchema::default(),
            final_demand: FinalDemandSchema::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodConfig {
    pub start: i32,
    pub end: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    #[default]
    SignedLog1p,
    Ln,
}

impl From<Transform> for techclust::LogTransform {
    fn from(t: Transform) -> Self {
        match t {
            Transform::SignedLog1p => techclust::LogTransform::SignedLog1p,
            Transform::Ln => techclust::LogTransform::Ln,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterConfig {
    pub k: usize,
    /// Defaults to `floor(0.8 n / k)`.
    pub min_size: Option<usize>,
    /// Defaults to `ceil(1.2 n / k)`.
    pub max_size: Option<usize>,
    pub restarts: usize,
    pub max_iter: usize,
    pub indicator_weight: f64,
    pub transform: Transform,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            k: techclust::DEFAULT_K,
            min_size: None,
            max_size: None,
            restarts: techclust::DEFAULT_RESTARTS,
            max_iter: techclust::DEFAULT_MAX_ITER,
            indicator_weight: techclust::DEFAULT_INDICATOR_WEIGHT,
            transform: Transform::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    #[default]
    Nats,
    Bits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynergyConfig {
    pub shuffles: usize,
    pub min_rows: usize,
    pub unit: Unit,
}

impl Default for SynergyConfig {
    fn default() -> Self {
        Self {
            shuffles: gpid::DEFAULT_SHUFFLES,
            min_rows: iotensor::DEFAULT_MIN_ROWS,
            unit: Unit::Nats,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackboneKind {
    #[default]
    NoiseCorrected,
    Disparity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Spectral {
    #[default]
    Weighted,
    Backbone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    #[default]
    Strength,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub method: BackboneKind,
    pub delta: f64,
    pub alpha: f64,
    pub null_samples: usize,
    pub spectral: Spectral,
    pub distribution: Distribution,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            method: BackboneKind::NoiseCorrected,
            delta: synnet::DEFAULT_DELTA,
            alpha: synnet::DEFAULT_DISPARITY_ALPHA,
            null_samples: synnet::DEFAULT_NULL_SAMPLES,
            spectral: Spectral::Weighted,
            distribution: Distribution::Strength,
        }
    }
}

impl NetworkConfig {
    pub fn backbone(&self) -> synnet::BackboneMethod {
        match self.method {
            BackboneKind::NoiseCorrected => {
                synnet::BackboneMethod::NoiseCorrected { delta: self.delta }
            }
            BackboneKind::Disparity => synnet::BackboneMethod::Disparity { alpha: self.alpha },
        }
    }

    pub fn stats_options(&self) -> synnet::StatsOptions {
        synnet::StatsOptions {
            spectral: match self.spectral {
                Spectral::Weighted => synnet::SpectralInput::Weighted,
                Spectral::Backbone => synnet::SpectralInput::Backbone,
            },
            distribution: match self.distribution {
                Distribution::Strength => synnet::NodeDistribution::Strength,
                Distribution::Uniform => synnet::NodeDistribution::Uniform,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComplexityConfig {
    pub rca_threshold: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ComplexityConfig {
    fn default() -> Self {
        Self {
            rca_threshold: ecx::DEFAULT_RCA_THRESHOLD,
            max_iter: ecx::DEFAULT_FITNESS_MAX_ITER,
            tol: ecx::DEFAULT_FITNESS_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Dependent {
    #[default]
    Efi,
    Eci,
}

impl Dependent {
    pub fn as_str(self) -> &'static str {
        match self {
            Dependent::Efi => "efi",
            Dependent::Eci => "eci",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ClusterBy {
    #[default]
    Country,
    Industry,
    Cluster,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegressConfig {
    pub dependent: Dependent,
    pub cluster_by: ClusterBy,
    pub log_floor: f64,
    pub bins: usize,
    pub gni_indicator: String,
    pub energy_indicators: Vec<String>,
    /// Sector left out of the dummy set.
    pub sector_baseline: String,
}

impl Default for RegressConfig {
    fn default() -> Self {
        Self {
            dependent: Dependent::Efi,
            cluster_by: ClusterBy::Country,
            log_floor: valid::DEFAULT_LOG_FLOOR,
            bins: valid::DEFAULT_BINS,
            gni_indicator: "gni_per_capita".to_string(),
            energy_indicators: Vec::new(),
            sector_baseline: Sector::Other.as_str().to_string(),
        }
    }
}

/// Command-line overrides; every flag replaces the config key of the same
/// name.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub start_year: Option<i32>,
    #[arg(long)]
    pub end_year: Option<i32>,
    #[arg(long, value_enum)]
    pub delimiter: Option<Delimiter>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub min_size: Option<usize>,
    #[arg(long)]
    pub max_size: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub kmeans_max_iter: Option<usize>,
    #[arg(long)]
    pub indicator_weight: Option<f64>,
    #[arg(long, value_enum)]
    pub transform: Option<Transform>,
    #[arg(long)]
    pub shuffles: Option<usize>,
    #[arg(long)]
    pub min_rows: Option<usize>,
    #[arg(long, value_enum)]
    pub unit: Option<Unit>,
    #[arg(long, value_enum)]
    pub backbone: Option<BackboneKind>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub null_samples: Option<usize>,
    #[arg(long, value_enum)]
    pub spectral: Option<Spectral>,
    #[arg(long, value_enum)]
    pub distribution: Option<Distribution>,
    #[arg(long)]
    pub rca_threshold: Option<f64>,
    #[arg(long)]
    pub fitness_max_iter: Option<usize>,
    #[arg(long)]
    pub fitness_tol: Option<f64>,
    #[arg(long, value_enum)]
    pub dependent: Option<Dependent>,
    #[arg(long, value_enum)]
    pub cluster_by: Option<ClusterBy>,
    #[arg(long)]
    pub log_floor: Option<f64>,
    #[arg(long)]
    pub bins: Option<usize>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, PipelineError> {
        let mut cfg: PipelineConfig =
            serde_json::from_str(text).map_err(|e| invalid(format!("config: {e}")))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::from_json(&text, base)
    }

    pub fn apply(&mut self, o: &Overrides) {
        set(&mut self.output_dir, o.output_dir.clone());
        set(&mut self.seed, o.seed);
        if o.threads.is_some() {
            self.threads = o.threads;
        }
        set(&mut self.period.start, o.start_year);
        set(&mut self.period.end, o.end_year);
        set(&mut self.schema.delimiter, o.delimiter);
        set(&mut self.cluster.k, o.k);
        if o.min_size.is_some() {
            self.cluster.min_size = o.min_size;
        }
        if o.max_size.is_some() {
            self.cluster.max_size = o.max_size;
        }
        set(&mut self.cluster.restarts, o.restarts);
        set(&mut self.cluster.max_iter, o.kmeans_max_iter);
        set(&mut self.cluster.indicator_weight, o.indicator_weight);
        set(&mut self.cluster.transform, o.transform);
        set(&mut self.synergy.shuffles, o.shuffles);
        set(&mut self.synergy.min_rows, o.min_rows);
        set(&mut self.synergy.unit, o.unit);
        set(&mut self.network.method, o.backbone);
        set(&mut self.network.delta, o.delta);
        set(&mut self.network.alpha, o.alpha);
        set(&mut self.network.null_samples, o.null_samples);
        set(&mut self.network.spectral, o.spectral);
        set(&mut self.network.distribution, o.distribution);
        set(&mut self.complexity.rca_threshold, o.rca_threshold);
        set(&mut self.complexity.max_iter, o.fitness_max_iter);
        set(&mut self.complexity.tol, o.fitness_tol);
        set(&mut self.regress.dependent, o.dependent);
        set(&mut self.regress.cluster_by, o.cluster_by);
        set(&mut self.regress.log_floor, o.log_floor);
        set(&mut self.regress.bins, o.bins);
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_root(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn period(&self) -> Result<Period, PipelineError> {
        let p = Period::new(self.period.start, self.period.end)
            .map_err(|e| invalid(format!("period: {e}")))?;
        if p.len() < 2 {
            return Err(invalid("period must span at least 2 years"));
        }
        Ok(p)
    }

    /// Every configured input file with its config spelling, in a fixed
    /// order.
    pub fn input_files(&self) -> Vec<(String, PathBuf)> {
        let i = &self.inputs;
        let mut out = vec![
            ("countries".to_string(), i.countries.clone()),
            ("industries".to_string(), i.industries.clone()),
        ];
        let opt = [
            ("sector_map", &i.sector_map),
            ("indicators", &i.indicators),
            ("trade", &i.trade),
            ("product_mapping", &i.product_mapping),
            ("deflator", &i.deflator),
        ];
        for (k, p) in opt {
            if let Some(p) = p {
                out.push((k.to_string(), p.clone()));
            }
        }
        for (n, p) in i.transactions.iter().enumerate() {
            out.push((format!("transactions[{n}]"), p.clone()));
        }
        for (n, p) in i.final_demand.iter().enumerate() {
            out.push((format!("final_demand[{n}]"), p.clone()));
        }
        out
    }

    /// Checks parameter ranges and that every input the given stages read
    /// exists.
    pub fn validate(&self, stages: &[Stage]) -> Result<(), PipelineError> {
        self.period()?;
        let c = &self.cluster;
        if c.k < 2 {
            return Err(invalid("cluster.k must be at least 2"));
        }
        if let (Some(lo), Some(hi)) = (c.min_size, c.max_size) {
            if lo > hi {
                return Err(invalid("cluster.min_size exceeds cluster.max_size"));
            }
        }
        if c.restarts == 0 || c.max_iter == 0 {
            return Err(invalid(
                "cluster.restarts and cluster.max_iter must be positive",
            ));
        }
        if !(c.indicator_weight > 0.0 && c.indicator_weight.is_finite()) {
            return Err(invalid("cluster.indicator_weight must be positive"));
        }
        if self.synergy.shuffles == 0 {
            return Err(invalid("synergy.shuffles must be positive"));
        }
        let n = &self.network;
        if !n.delta.is_finite() {
            return Err(invalid("network.delta must be finite"));
        }
        if !(n.alpha > 0.0 && n.alpha < 1.0) {
            return Err(invalid("network.alpha must lie in (0, 1)"));
        }
        if n.null_samples == 0 {
            return Err(invalid("network.null_samples must be positive"));
        }
        let x = &self.complexity;
        if !(x.rca_threshold > 0.0 && x.rca_threshold.is_finite()) {
            return Err(invalid("complexity.rca_threshold must be positive"));
        }
        if x.max_iter == 0 || !(x.tol > 0.0) {
            return Err(invalid(
                "complexity.max_iter and complexity.tol must be positive",
            ));
        }
        let r = &self.regress;
        if !(r.log_floor > 0.0 && r.log_floor.is_finite()) {
            return Err(invalid("regress.log_floor must be positive"));
        }
        if r.sector_baseline.parse::<Sector>().is_err() {
            return Err(invalid(format!(
                "regress.sector_baseline {:?} is not a sector",
                r.sector_baseline
            )));
        }
        if r.bins < 2 {
            return Err(invalid("regress.bins must be at least 2"));
        }
        if self.threads == Some(0) {
            return Err(invalid("threads must be positive"));
        }

        let i = &self.inputs;
        let mut need: Vec<(&str, &Path)> = vec![
            ("countries", i.countries.as_path()),
            ("industries", i.industries.as_path()),
        ];
        if let Some(p) = &i.sector_map {
            need.push(("sector_map", p));
        }
        if stages.contains(&Stage::Ingest) {
            if i.transactions.is_empty() || i.final_demand.is_empty() {
                return Err(invalid("ingest needs transactions and final_demand inputs"));
            }
            need.extend(i.transactions.iter().map(|p| ("transactions", p.as_path())));
            need.extend(i.final_demand.iter().map(|p| ("final_demand", p.as_path())));
            if let Some(p) = &i.deflator {
                need.push(("deflator", p));
            }
        }
        if stages
            .iter()
            .any(|s| matches!(s, Stage::Cluster | Stage::Regress))
        {
            if let Some(p) = &i.indicators {
                need.push(("indicators", p));
            }
        }
        if stages.contains(&Stage::Complexity) {
            match (&i.trade, &i.product_mapping) {
                (Some(t), Some(m)) => {
                    need.push(("trade", t));
                    need.push(("product_mapping", m));
                }
                _ => return Err(invalid("complexity needs trade and product_mapping inputs")),
            }
        }
        for (name, p) in need {
            let full = self.resolve(p);
            if !full.is_file() {
                return Err(invalid(format!(
                    "input {name} not found at {}",
                    full.display()
                )));
            }
        }
        Ok(())
    }
}
