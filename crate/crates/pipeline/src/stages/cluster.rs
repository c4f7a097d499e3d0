use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use synergy_core::iotensor::{IndustryId, Registry, SeriesKey};
use synergy_core::seed::derive_seed;
use synergy_core::techclust::{
    build_feature_matrix, constrained_kmeans, marginal_product_series, median_log_mp,
    ClusterAssignment, FeatureMatrix, IndicatorTable, KMeansParams,
};

use super::{ingest, Ctx, Stage};
use crate::config::Transform;
use crate::formats::{self, fmt_f64};

pub const ASSIGNMENTS: &str = "assignments.csv";
pub const SIDECAR: &str = "assignments.json";

#[derive(Serialize, Deserialize)]
struct Settings {
    k: usize,
    min_size: usize,
    max_size: usize,
    restarts: usize,
    max_iter: usize,
    indicator_weight: f64,
    transform: Transform,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct IndustryReport {
    seed: u64,
    objective: f64,
    sizes: Vec<usize>,
    converged: bool,
    iterations: usize,
    objective_trace: Vec<f64>,
    columns: Vec<String>,
    imputed: usize,
    warnings: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    settings: Settings,
    industries: BTreeMap<String, IndustryReport>,
}

/// Reads the indicator file, if configured, into averaged values.
pub(super) fn indicators(ctx: &Ctx, warnings: &mut Vec<String>) -> Result<Option<IndicatorTable>> {
    let Some(p) = &ctx.cfg.inputs.indicators else {
        return Ok(None);
    };
    let mut rejects = Vec::new();
    let (rows, _) = formats::read_indicators(&ctx.cfg.resolve(p), &ctx.registry, &mut rejects)?;
    if !rejects.is_empty() {
        warnings.push(format!("{} indicator rows rejected", rejects.len()));
        formats::write_rejects(&ctx.dir.join("indicator_rejects.csv"), &rejects)?;
    }
    Ok(Some(IndicatorTable::from_records(
        rows.iter().map(|(c, y, n, v)| (*c, *y, n.as_str(), *v)),
    )))
}

pub(super) fn run(ctx: &Ctx) -> Result<Vec<String>> {
    let cfg = &ctx.cfg.cluster;
    let reg = &ctx.registry;
    let mut warnings = Vec::new();
    let flows = formats::read_flows(&ctx.upstream(Stage::Ingest, ingest::FLOWS)?, reg)?;
    let indicators = indicators(ctx, &mut warnings)?.unwrap_or_default();

    let n = reg.country_count();
    let balanced = KMeansParams::balanced(n, cfg.k, 0);
    let min_size = cfg.min_size.unwrap_or(balanced.min_size);
    let max_size = cfg.max_size.unwrap_or(balanced.max_size);
    let industries: Vec<IndustryId> = reg.industries().collect();

    let results: Vec<Result<(FeatureMatrix, ClusterAssignment, u64)>> = ctx.pool.install(|| {
        industries
            .par_iter()
            .map(|&j| {
                let code = reg.industry_code(j);
                let mut features = Vec::new();
                for c in reg.countries() {
                    let key = |input| SeriesKey {
                        country: c,
                        industry: j,
                        input,
                    };
                    let y = flows
                        .get(&key(None))
                        .ok_or_else(|| anyhow!("no output series for {}", reg.country_code(c)))?;
                    for i in reg.industries() {
                        let Some(x) = flows.get(&key(Some(i))) else {
                            continue;
                        };
                        if let Ok(mp) = marginal_product_series(x, y) {
                            features.push(median_log_mp(&mp, cfg.transform.into()));
                        }
                    }
                }
                let fm = build_feature_matrix(&features, &indicators, reg, j, cfg.indicator_weight)
                    .with_context(|| format!("industry {code}"))?;
                let seed = derive_seed(ctx.cfg.seed, "cluster", code);
                let params = KMeansParams {
                    k: cfg.k,
                    min_size,
                    max_size,
                    seed,
                    restarts: cfg.restarts,
                    max_iter: cfg.max_iter,
                };
                let a = constrained_kmeans(&fm, Some(j), &params)
                    .with_context(|| format!("industry {code}"))?;
                Ok((fm, a, seed))
            })
            .collect()
    });

    let mut rows = Vec::new();
    let mut feature_rows = Vec::new();
    let mut reports = BTreeMap::new();
    for (j, r) in industries.iter().zip(results) {
        let (fm, a, seed) = r?;
        let code = reg.industry_code(*j);
        for (&c, &l) in &a.labels {
            rows.push(vec![
                code.to_string(),
                reg.country_code(c).to_string(),
                l.to_string(),
            ]);
        }
        for (row, &c) in fm.countries.iter().enumerate() {
            for (col, name) in fm.columns.iter().enumerate() {
                feature_rows.push(vec![
                    code.to_string(),
                    reg.country_code(c).to_string(),
                    name.clone(),
                    fmt_f64(fm.values[(row, col)]),
                    fm.is_missing(row, col).to_string(),
                ]);
            }
        }
        for w in &fm.warnings {
            warnings.push(format!("industry {code}: {w}"));
        }
        if !a.converged {
            warnings.push(format!("industry {code}: k-means hit the iteration limit"));
        }
        reports.insert(
            code.to_string(),
            IndustryReport {
                seed,
                objective: a.objective,
                sizes: a.sizes.clone(),
                converged: a.converged,
                iterations: a.iterations,
                objective_trace: a.objective_trace.clone(),
                columns: fm.columns.clone(),
                imputed: fm.missing.iter().filter(|m| **m).count(),
                warnings: fm.warnings.clone(),
            },
        );
    }
    formats::write_csv(
        &ctx.dir.join(ASSIGNMENTS),
        &["industry", "country", "cluster"],
        rows,
    )?;
    formats::write_csv(
        &ctx.dir.join("features.csv"),
        &["industry", "country", "column", "value", "imputed"],
        feature_rows,
    )?;
    formats::write_json(
        &ctx.dir.join(SIDECAR),
        &Sidecar {
            settings: Settings {
                k: cfg.k,
                min_size,
                max_size,
                restarts: cfg.restarts,
                max_iter: cfg.max_iter,
                indicator_weight: cfg.indicator_weight,
                transform: cfg.transform,
                seed: ctx.cfg.seed,
            },
            industries: reports,
        },
    )?;
    Ok(warnings)
}

/// Reads assignments written by this stage, one per industry.
pub fn read_assignments(
    dir: &Path,
    reg: &Registry,
) -> Result<BTreeMap<IndustryId, ClusterAssignment>> {
    let side: Sidecar = serde_json::from_str(&std::fs::read_to_string(dir.join(SIDECAR))?)
        .context("reading cluster sidecar")?;
    let k = side.settings.k;
    let mut labels: BTreeMap<IndustryId, BTreeMap<_, usize>> = BTreeMap::new();
    for row in formats::read_table(&dir.join(ASSIGNMENTS))? {
        let j = reg
            .industry_id(&row["industry"])
            .ok_or_else(|| anyhow!("unknown industry {:?}", row["industry"]))?;
        let c = reg
            .country_id(&row["country"])
            .ok_or_else(|| anyhow!("unknown country {:?}", row["country"]))?;
        let l: usize = row["cluster"].parse()?;
        labels.entry(j).or_default().insert(c, l);
    }
    let mut out = BTreeMap::new();
    for (j, l) in labels {
        let mut a = ClusterAssignment::from_labels(Some(j), k, l)
            .ok_or_else(|| anyhow!("cluster label out of range for k = {k}"))?;
        if let Some(r) = side.industries.get(reg.industry_code(j)) {
            a.objective = r.objective;
            a.converged = r.converged;
            a.iterations = r.iterations;
        }
        out.insert(j, a);
    }
    if out.is_empty() {
        bail!("no cluster assignments found");
    }
    Ok(out)
}
