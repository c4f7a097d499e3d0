use std::collections::{BTreeMap, BTreeSet};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use synergy_core::iotensor::{IndustryId, Sector, SeriesKey};
use synergy_core::stats;
use synergy_core::valid::{
    binned_scatter, log_synergy, ols_cluster, BinnedScatter, DataTable, RegressionResult,
    RegressionSpec, INTERCEPT,
};

use super::{cluster, complexity, ingest, synergy, Ctx, Stage};
use crate::config::{ClusterBy, RegressConfig};
use crate::formats::{self, fmt_f64, fmt_opt};

pub const REGRESSION: &str = "regression.csv";
pub const ANALYSIS: &str = "analysis.csv";

const CLUSTER_COLUMN: &str = "cluster_key";

/// Observation table: one row per scored (industry, cluster, input pair)
/// and member country of the cluster.
struct Analysis {
    keys: Vec<[String; 5]>,
    cluster_key: Vec<String>,
    /// Numeric columns in output order; `None` is missing.
    columns: Vec<(String, Vec<Option<f64>>)>,
    floored: usize,
}

impl Analysis {
    fn column(&self, name: &str) -> &[Option<f64>] {
        &self
            .columns
            .iter()
            .find(|(n, _)| n == name)
            .expect("known column")
            .1
    }
}

fn sector_column(s: Sector) -> String {
    format!("sector_{}", s.as_str())
}

fn energy_column(name: &str) -> String {
    format!("energy_{name}")
}

fn ln_positive(v: Option<f64>) -> Option<f64> {
    v.filter(|v| *v > 0.0).map(f64::ln)
}

/// Sector dummies: every sector present except the baseline, which falls
/// back to the first present sector when absent.
fn dummy_sectors(
    present: &BTreeSet<Sector>,
    baseline: Sector,
    warnings: &mut Vec<String>,
) -> Vec<Sector> {
    let base = if present.contains(&baseline) {
        baseline
    } else {
        let Some(&first) = present.iter().next() else {
            return Vec::new();
        };
        warnings.push(format!(
            "baseline sector {} absent, using {}",
            baseline.as_str(),
            first.as_str()
        ));
        first
    };
    present.iter().copied().filter(|&s| s != base).collect()
}

fn build_analysis(ctx: &Ctx, warnings: &mut Vec<String>) -> Result<(Analysis, Vec<Sector>)> {
    let cfg = &ctx.cfg.regress;
    let reg = &ctx.registry;
    let scores = synergy::read_scores(&ctx.upstream(Stage::Synergy, synergy::SCORES)?, reg)?;
    ctx.upstream(Stage::Cluster, cluster::ASSIGNMENTS)?;
    let assignments = cluster::read_assignments(&ctx.stage_dir(Stage::Cluster), reg)?;
    let complexity =
        complexity::read_averaged(&ctx.upstream(Stage::Complexity, complexity::SCORES)?, reg)?;
    let flows = formats::read_flows(&ctx.upstream(Stage::Ingest, ingest::FLOWS)?, reg)?;
    let indicators = cluster::indicators(ctx, warnings)?.unwrap_or_default();

    let mut keys = Vec::new();
    let mut cluster_key = Vec::new();
    let mut synergy_vals = Vec::new();
    let mut efi = Vec::new();
    let mut eci = Vec::new();
    let mut gni = Vec::new();
    let mut output = Vec::new();
    let mut energy: Vec<Vec<Option<f64>>> = vec![Vec::new(); cfg.energy_indicators.len()];
    let mut industry_of: Vec<IndustryId> = Vec::new();
    for s in &scores {
        let Some(v) = s
            .pid
            .and_then(|p| p.synergy_corrected.or(Some(p.synergy_raw)))
        else {
            continue;
        };
        let Some(a) = assignments.get(&s.industry) else {
            continue;
        };
        let code = reg.industry_code(s.industry);
        let (e, c) = complexity.get(&s.industry).copied().unwrap_or_default();
        for country in a.members(s.cluster) {
            keys.push([
                reg.country_code(country).to_string(),
                code.to_string(),
                s.cluster.to_string(),
                reg.industry_code(s.pair.0).to_string(),
                reg.industry_code(s.pair.1).to_string(),
            ]);
            cluster_key.push(match cfg.cluster_by {
                ClusterBy::Country => reg.country_code(country).to_string(),
                ClusterBy::Industry => code.to_string(),
                ClusterBy::Cluster => format!("{code}/{}", s.cluster),
            });
            synergy_vals.push(v);
            efi.push(e);
            eci.push(c);
            gni.push(ln_positive(indicators.get(&cfg.gni_indicator, country)));
            let y = flows.get(&SeriesKey {
                country,
                industry: s.industry,
                input: None,
            });
            output.push(ln_positive(y.map(|y| stats::mean(&y.values))));
            for (k, name) in cfg.energy_indicators.iter().enumerate() {
                energy[k].push(indicators.get(name, country));
            }
            industry_of.push(s.industry);
        }
    }
    if keys.is_empty() {
        bail!("no scored synergy to regress on");
    }
    if gni.iter().all(Option::is_none) {
        warnings.push(format!("indicator {} not available", cfg.gni_indicator));
    }
    let (logs, floored) = log_synergy(&synergy_vals, cfg.log_floor)?;
    if floored > 0 {
        warnings.push(format!(
            "{floored} of {} synergy values floored at {}",
            logs.len(),
            cfg.log_floor
        ));
    }

    let present: BTreeSet<Sector> = industry_of.iter().map(|&i| reg.sector(i)).collect();
    let baseline: Sector = cfg.sector_baseline.parse()?;
    let dummies = dummy_sectors(&present, baseline, warnings);

    let mut columns = vec![
        (
            "synergy".to_string(),
            synergy_vals.into_iter().map(Some).collect(),
        ),
        (
            "log_synergy".to_string(),
            logs.into_iter().map(Some).collect(),
        ),
        ("efi".to_string(), efi),
        ("eci".to_string(), eci),
        ("log_gni".to_string(), gni),
    ];
    for &s in &dummies {
        let col = industry_of
            .iter()
            .map(|&i| Some(if reg.sector(i) == s { 1.0 } else { 0.0 }))
            .collect();
        columns.push((sector_column(s), col));
    }
    columns.push(("log_total_output".to_string(), output));
    for (name, col) in cfg.energy_indicators.iter().zip(energy) {
        columns.push((energy_column(name), col));
    }
    Ok((
        Analysis {
            keys,
            cluster_key,
            columns,
            floored,
        },
        dummies,
    ))
}

/// Cumulative regressor sets, one per model.
fn model_ladder(cfg: &RegressConfig, dummies: &[Sector]) -> Vec<Vec<String>> {
    let mut steps: Vec<Vec<String>> = vec![
        vec!["log_synergy".to_string()],
        vec!["log_gni".to_string()],
        dummies.iter().map(|&s| sector_column(s)).collect(),
        vec!["log_total_output".to_string()],
    ];
    if !cfg.energy_indicators.is_empty() {
        steps.push(
            cfg.energy_indicators
                .iter()
                .map(|n| energy_column(n))
                .collect(),
        );
    }
    let mut out = Vec::new();
    let mut acc = Vec::new();
    for s in steps {
        acc.extend(s);
        out.push(acc.clone());
    }
    out
}

/// Listwise deletion on the model's columns, then OLS.
fn fit(a: &Analysis, dependent: &str, regressors: &[String]) -> Result<RegressionResult> {
    let used: Vec<&str> = std::iter::once(dependent)
        .chain(regressors.iter().map(String::as_str))
        .collect();
    let rows: Vec<usize> = (0..a.keys.len())
        .filter(|&r| {
            used.iter()
                .all(|c| a.column(c)[r].is_some_and(f64::is_finite))
        })
        .collect();
    let mut data = DataTable::default().with_labels(
        CLUSTER_COLUMN,
        rows.iter().map(|&r| a.cluster_key[r].clone()).collect(),
    );
    for c in &used {
        let col = a.column(c);
        data = data.with_numeric(
            c,
            rows.iter().map(|&r| col[r].unwrap_or(f64::NAN)).collect(),
        );
    }
    let spec = RegressionSpec {
        dependent: dependent.to_string(),
        regressors: regressors.to_vec(),
        cluster_column: CLUSTER_COLUMN.to_string(),
        intercept: true,
    };
    Ok(ols_cluster(&data, &spec)?)
}

/// Compact number for the printed table.
fn fmt_table(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-3..1e4).contains(&a) {
        format!("{v:.4}")
    } else {
        format!("{v:.3e}")
    }
}

#[derive(Serialize)]
struct ModelReport {
    regressors: Vec<String>,
    result: Option<ModelResult>,
    error: Option<String>,
}

#[derive(Serialize)]
struct ModelResult {
    terms: BTreeMap<String, Term>,
    r2: f64,
    adj_r2: f64,
    rss: f64,
    observations: usize,
    clusters: usize,
}

#[derive(Serialize)]
struct Term {
    coefficient: f64,
    std_error: f64,
    t_value: f64,
    p_value: f64,
    stars: &'static str,
}

impl From<&RegressionResult> for ModelResult {
    fn from(r: &RegressionResult) -> Self {
        let terms = r
            .names
            .iter()
            .enumerate()
            .map(|(k, n)| {
                (
                    n.clone(),
                    Term {
                        coefficient: r.coefficients[k],
                        std_error: r.std_errors[k],
                        t_value: r.t_values[k],
                        p_value: r.p_values[k],
                        stars: r.stars[k].as_str(),
                    },
                )
            })
            .collect();
        Self {
            terms,
            r2: r.r2,
            adj_r2: r.adj_r2,
            rss: r.rss,
            observations: r.observations,
            clusters: r.clusters,
        }
    }
}

#[derive(Serialize)]
struct Report<'a> {
    settings: &'a RegressConfig,
    dependent: &'a str,
    rows: usize,
    floored: usize,
    models: Vec<ModelReport>,
}

#[derive(Serialize)]
struct BinnedReport {
    slope: f64,
    intercept: f64,
    points: usize,
}

fn table_rows(ladder: &[Vec<String>], fits: &[Option<RegressionResult>]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    let terms = ladder.last().cloned().unwrap_or_default();
    for t in terms.iter().filter(|t| *t != INTERCEPT) {
        let mut coef = vec![t.clone()];
        let mut se = vec![String::new()];
        for f in fits {
            match f.as_ref().and_then(|r| r.get(t)) {
                Some((b, s, stars)) => {
                    coef.push(format!("{}{}", fmt_table(b), stars.as_str()));
                    se.push(format!("({})", fmt_table(s)));
                }
                None => {
                    coef.push(String::new());
                    se.push(String::new());
                }
            }
        }
        rows.push(coef);
        rows.push(se);
    }
    let footer = |name: &str, f: &dyn Fn(&RegressionResult) -> String| {
        let mut row = vec![name.to_string()];
        row.extend(fits.iter().map(|r| r.as_ref().map_or_else(String::new, f)));
        row
    };
    rows.push(footer("observations", &|r| r.observations.to_string()));
    rows.push(footer("clusters", &|r| r.clusters.to_string()));
    rows.push(footer("adj_r2", &|r| fmt_table(r.adj_r2)));
    rows
}

fn binned(a: &Analysis, y: &str, bins: usize) -> Result<(BinnedScatter, usize)> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = a
        .column("log_synergy")
        .iter()
        .zip(a.column(y))
        .filter_map(|(x, y)| Some((*x)?).zip(*y))
        .unzip();
    Ok((binned_scatter(&xs, &ys, bins)?, xs.len()))
}

pub(super) fn run(ctx: &Ctx) -> Result<Vec<String>> {
    let cfg = &ctx.cfg.regress;
    let mut warnings = Vec::new();
    let (analysis, dummies) = build_analysis(ctx, &mut warnings)?;
    let dependent = cfg.dependent.as_str();

    let mut header: Vec<&str> = vec!["country", "industry", "cluster", "input_1", "input_2"];
    header.extend(analysis.columns.iter().map(|(n, _)| n.as_str()));
    formats::write_csv(
        &ctx.dir.join(ANALYSIS),
        &header,
        (0..analysis.keys.len()).map(|r| {
            let mut row = analysis.keys[r].to_vec();
            row.extend(analysis.columns.iter().map(|(_, c)| fmt_opt(c[r])));
            row
        }),
    )?;

    let ladder = model_ladder(cfg, &dummies);
    let mut fits = Vec::new();
    let mut reports = Vec::new();
    for (m, regressors) in ladder.iter().enumerate() {
        match fit(&analysis, dependent, regressors) {
            Ok(r) => {
                reports.push(ModelReport {
                    regressors: regressors.clone(),
                    result: Some(ModelResult::from(&r)),
                    error: None,
                });
                fits.push(Some(r));
            }
            Err(e) if m == 0 => return Err(e.context("model 1")),
            Err(e) => {
                warnings.push(format!("model {}: {e:#}", m + 1));
                reports.push(ModelReport {
                    regressors: regressors.clone(),
                    result: None,
                    error: Some(format!("{e:#}")),
                });
                fits.push(None);
            }
        }
    }
    let mut header = vec!["term".to_string()];
    header.extend((1..=ladder.len()).map(|m| format!("model_{m}")));
    formats::write_csv(
        &ctx.dir.join(REGRESSION),
        &header.iter().map(String::as_str).collect::<Vec<_>>(),
        table_rows(&ladder, &fits),
    )?;
    formats::write_json(
        &ctx.dir.join("regression.json"),
        &Report {
            settings: cfg,
            dependent,
            rows: analysis.keys.len(),
            floored: analysis.floored,
            models: reports,
        },
    )?;

    let mut binned_reports = BTreeMap::new();
    for y in ["efi", "eci"] {
        match binned(&analysis, y, cfg.bins) {
            Ok((b, points)) => {
                formats::write_csv(
                    &ctx.dir.join(format!("binned_{y}.csv")),
                    &["bin", "lower", "upper", "mean_x", "mean_y", "count"],
                    b.bins.iter().enumerate().map(|(k, bin)| {
                        vec![
                            k.to_string(),
                            fmt_f64(bin.lower),
                            fmt_f64(bin.upper),
                            fmt_f64(bin.mean_x),
                            fmt_f64(bin.mean_y),
                            bin.count.to_string(),
                        ]
                    }),
                )?;
                binned_reports.insert(
                    y,
                    BinnedReport {
                        slope: b.slope,
                        intercept: b.intercept,
                        points,
                    },
                );
            }
            Err(e) => warnings.push(format!("binned scatter of {y}: {e:#}")),
        }
    }
    formats::write_json(&ctx.dir.join("binned.json"), &binned_reports)
        .context("writing binned.json")?;
    Ok(warnings)
}
