use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use synergy_core::gpid::{synergy_score, to_bits, InfoUnit, PidResult};
use synergy_core::iotensor::{pool_cluster_samples, IndustryId, Registry};
use synergy_core::seed::derive_seed;

use super::{cluster, ingest, Ctx, Stage};
use crate::config::Unit;
use crate::formats::{self, fmt_f64, fmt_opt, parse_opt};

pub const SCORES: &str = "scores.csv";

const HEADER: [&str; 17] = [
    "industry",
    "cluster",
    "input_1",
    "input_2",
    "rows",
    "below_minimum",
    "mi_joint",
    "mi_x1",
    "mi_x2",
    "redundancy",
    "unique_x1",
    "unique_x2",
    "synergy_raw",
    "synergy_bias",
    "synergy_corrected",
    "unit",
    "status",
];

/// One (industry, cluster, input pair) score as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub industry: IndustryId,
    pub cluster: usize,
    pub pair: (IndustryId, IndustryId),
    pub rows: usize,
    pub below_minimum: bool,
    /// `None` when the task failed; `status` says why.
    pub pid: Option<PidResult>,
    pub status: String,
}

/// Seed key of one synergy task.
pub fn task_key(
    reg: &Registry,
    industry: IndustryId,
    cluster: usize,
    pair: (IndustryId, IndustryId),
) -> String {
    format!(
        "{}/{}/{}/{}",
        reg.industry_code(industry),
        cluster,
        reg.industry_code(pair.0),
        reg.industry_code(pair.1)
    )
}

#[derive(Serialize)]
struct Sidecar {
    shuffles: usize,
    min_rows: usize,
    unit: Unit,
    seed: u64,
    tasks: usize,
    scored: usize,
    failed: usize,
    below_minimum: usize,
    failures: BTreeMap<String, String>,
}

pub(super) fn run(ctx: &Ctx) -> Result<Vec<String>> {
    let cfg = &ctx.cfg.synergy;
    let reg = &ctx.registry;
    let fluct =
        formats::read_fluctuations(&ctx.upstream(Stage::Ingest, ingest::FLUCTUATIONS)?, reg)?;
    ctx.upstream(Stage::Cluster, cluster::ASSIGNMENTS)?;
    let assignments = cluster::read_assignments(&ctx.stage_dir(Stage::Cluster), reg)?;

    let pairs = reg.input_pairs();
    let mut tasks = Vec::new();
    for (&j, a) in &assignments {
        for g in 0..a.k {
            for &p in &pairs {
                tasks.push((j, g, p));
            }
        }
    }
    let scored: Vec<Result<ScoreRow>> = ctx.pool.install(|| {
        tasks
            .par_iter()
            .map(|&(j, g, pair)| {
                let sample =
                    pool_cluster_samples(&fluct, &assignments[&j], g, j, pair, cfg.min_rows)?;
                let key = task_key(reg, j, g, pair);
                let seed = derive_seed(ctx.cfg.seed, "synergy", &key);
                let (pid, status) = match synergy_score(&sample, cfg.shuffles, seed) {
                    Ok(r) => match cfg.unit {
                        Unit::Nats => (Some(r), "ok".to_string()),
                        Unit::Bits => (Some(to_bits(&r)?), "ok".to_string()),
                    },
                    Err(e) => (None, e.to_string()),
                };
                Ok(ScoreRow {
                    industry: j,
                    cluster: g,
                    pair,
                    rows: sample.len(),
                    below_minimum: sample.below_minimum,
                    pid,
                    status,
                })
            })
            .collect()
    });
    let scored = scored.into_iter().collect::<Result<Vec<_>>>()?;

    let mut warnings = Vec::new();
    let below = scored.iter().filter(|s| s.below_minimum).count();
    if below > 0 {
        warnings.push(format!(
            "{below} of {} pooled samples have fewer than {} rows",
            scored.len(),
            cfg.min_rows
        ));
    }
    let failures: BTreeMap<String, String> = scored
        .iter()
        .filter(|s| s.pid.is_none())
        .map(|s| {
            (
                task_key(reg, s.industry, s.cluster, s.pair),
                s.status.clone(),
            )
        })
        .collect();
    if !failures.is_empty() {
        warnings.push(format!(
            "{} synergy tasks could not be scored",
            failures.len()
        ));
    }

    formats::write_csv(
        &ctx.dir.join(SCORES),
        &HEADER,
        scored.iter().map(|s| to_row(reg, s)),
    )?;
    formats::write_json(
        &ctx.dir.join("scores.json"),
        &Sidecar {
            shuffles: cfg.shuffles,
            min_rows: cfg.min_rows,
            unit: cfg.unit,
            seed: ctx.cfg.seed,
            tasks: scored.len(),
            scored: scored.len() - failures.len(),
            failed: failures.len(),
            below_minimum: below,
            failures,
        },
    )?;
    Ok(warnings)
}

fn to_row(reg: &Registry, s: &ScoreRow) -> Vec<String> {
    let mut row = vec![
        reg.industry_code(s.industry).to_string(),
        s.cluster.to_string(),
        reg.industry_code(s.pair.0).to_string(),
        reg.industry_code(s.pair.1).to_string(),
        s.rows.to_string(),
        s.below_minimum.to_string(),
    ];
    match &s.pid {
        Some(p) => row.extend([
            fmt_f64(p.mi_joint),
            fmt_f64(p.mi_x1),
            fmt_f64(p.mi_x2),
            fmt_f64(p.redundancy),
            fmt_f64(p.unique_x1),
            fmt_f64(p.unique_x2),
            fmt_f64(p.synergy_raw),
            fmt_opt(p.synergy_bias),
            fmt_opt(p.synergy_corrected),
            p.unit.as_str().to_string(),
        ]),
        None => row.extend(std::iter::repeat_n(String::new(), 10)),
    }
    row.push(s.status.clone());
    row
}

/// Reads the score table written by this stage.
pub fn read_scores(path: &Path, reg: &Registry) -> Result<Vec<ScoreRow>> {
    let mut out = Vec::new();
    for (n, r) in formats::read_table(path)?.into_iter().enumerate() {
        let ctx = || format!("{} row {}", path.display(), n + 2);
        let ind = |f: &str| {
            reg.industry_id(&r[f])
                .ok_or_else(|| anyhow!("unknown industry {:?}", r[f]))
        };
        let num =
            |f: &str| -> Result<f64> { parse_opt(&r[f])?.ok_or_else(|| anyhow!("empty {f}")) };
        let pid = if r["status"] == "ok" {
            let unit = match r["unit"].as_str() {
                "bits" => InfoUnit::Bits,
                _ => InfoUnit::Nats,
            };
            Some(PidResult {
                mi_joint: num("mi_joint").with_context(ctx)?,
                mi_x1: num("mi_x1").with_context(ctx)?,
                mi_x2: num("mi_x2").with_context(ctx)?,
                redundancy: num("redundancy").with_context(ctx)?,
                unique_x1: num("unique_x1").with_context(ctx)?,
                unique_x2: num("unique_x2").with_context(ctx)?,
                synergy_raw: num("synergy_raw").with_context(ctx)?,
                synergy_bias: parse_opt(&r["synergy_bias"]).with_context(ctx)?,
                synergy_corrected: parse_opt(&r["synergy_corrected"]).with_context(ctx)?,
                unit,
            })
        } else {
            None
        };
        out.push(ScoreRow {
            industry: ind("industry").with_context(ctx)?,
            cluster: r["cluster"].parse().with_context(ctx)?,
            pair: (
                ind("input_1").with_context(ctx)?,
                ind("input_2").with_context(ctx)?,
            ),
            rows: r["rows"].parse().with_context(ctx)?,
            below_minimum: r["below_minimum"].parse().with_context(ctx)?,
            pid,
            status: r["status"].clone(),
        });
    }
    Ok(out)
}
