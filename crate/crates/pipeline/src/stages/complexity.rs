use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use synergy_core::ecx::{
    aggregate_exports, complexity_scores, intertemporal_average, rca_binarize, ComplexityScores,
};
use synergy_core::iotensor::{CountryId, IndustryId, Registry, Year};

use super::Ctx;
use crate::config::ComplexityConfig;
use crate::formats::{self, fmt_f64};

pub const SCORES: &str = "scores.csv";

/// Period label of the averaged scores.
pub const AVERAGED: &str = "averaged";

#[derive(Serialize)]
struct YearReport {
    countries: usize,
    industries: usize,
    dropped_countries: Vec<String>,
    dropped_industries: Vec<String>,
    iterations: usize,
    residual: f64,
    converged: bool,
    eci_error: Option<String>,
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    settings: &'a ComplexityConfig,
    trade_rows: usize,
    rejected_rows: usize,
    years: BTreeMap<Year, YearReport>,
    skipped_years: BTreeMap<Year, String>,
    excluded_industries: Vec<String>,
    excluded_countries: Vec<String>,
}

fn score_rows(reg: &Registry, period: &str, s: &ComplexityScores, out: &mut Vec<Vec<String>>) {
    let mut push = |level: &str, code: &str, index: &str, v: f64| {
        out.push(vec![
            period.to_string(),
            level.to_string(),
            code.to_string(),
            index.to_string(),
            fmt_f64(v),
        ]);
    };
    for (&c, &v) in &s.fitness {
        push("country", reg.country_code(c), "fitness", v);
    }
    for (&i, &v) in &s.q {
        push("industry", reg.industry_code(i), "efi", v);
    }
    for (&i, &v) in &s.eci {
        push("industry", reg.industry_code(i), "eci", v);
    }
}

pub(super) fn run(ctx: &Ctx) -> Result<Vec<String>> {
    let cfg = &ctx.cfg.complexity;
    let reg = &ctx.registry;
    let inputs = &ctx.cfg.inputs;
    let (Some(trade), Some(mapping)) = (&inputs.trade, &inputs.product_mapping) else {
        bail!("the complexity stage needs trade and product_mapping inputs");
    };
    let mut rejects = Vec::new();
    let (mapping, _) = formats::read_product_mapping(&ctx.cfg.resolve(mapping), reg, &mut rejects)?;
    let trade_path = ctx.cfg.resolve(trade);
    let (records, lines, counts) = formats::read_trade(&trade_path, reg, &mut rejects)?;
    let countries: Vec<CountryId> = reg.countries().collect();
    let industries: Vec<IndustryId> = reg.industries().collect();
    let (per_year, rejected) =
        aggregate_exports(&records, &mapping, &countries, &industries, reg.period());
    let file = trade_path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    for r in &rejected {
        rejects.push(formats::RowReject {
            file: file.clone(),
            line: lines[r.index],
            error: format!("product {:?}: {}", r.product, r.reason),
        });
    }

    let mut warnings = Vec::new();
    if !rejects.is_empty() {
        warnings.push(format!(
            "{} trade rows rejected (see rejects.csv)",
            rejects.len()
        ));
    }
    let mut scored = Vec::new();
    let mut years = BTreeMap::new();
    let mut skipped = BTreeMap::new();
    for (&y, em) in &per_year {
        let outcome = rca_binarize(em, cfg.rca_threshold)
            .and_then(|rca| complexity_scores(&rca, cfg.max_iter, cfg.tol).map(|s| (rca, s)));
        match outcome {
            Ok((rca, s)) => {
                if !s.converged {
                    warnings.push(format!("{y}: fitness iteration did not converge"));
                }
                if let Some(e) = &s.eci_error {
                    warnings.push(format!("{y}: ECI undefined ({e})"));
                }
                years.insert(
                    y,
                    YearReport {
                        countries: rca.countries.len(),
                        industries: rca.industries.len(),
                        dropped_countries: rca
                            .dropped_countries
                            .iter()
                            .map(|&c| reg.country_code(c).to_string())
                            .collect(),
                        dropped_industries: rca
                            .dropped_industries
                            .iter()
                            .map(|&i| reg.industry_code(i).to_string())
                            .collect(),
                        iterations: s.iterations,
                        residual: s.residual,
                        converged: s.converged,
                        eci_error: s.eci_error.as_ref().map(|e| e.to_string()),
                    },
                );
                scored.push(s);
            }
            Err(e) => {
                warnings.push(format!("{y}: skipped ({e})"));
                skipped.insert(y, e.to_string());
            }
        }
    }
    let avg = intertemporal_average(&scored).context("averaging complexity over years")?;
    if !avg.excluded_industries.is_empty() {
        warnings.push(format!(
            "{} industries not scored in every year",
            avg.excluded_industries.len()
        ));
    }

    let mut rows = Vec::new();
    for s in &scored {
        let label = s.year.map_or_else(String::new, |y| y.to_string());
        score_rows(reg, &label, s, &mut rows);
    }
    score_rows(reg, AVERAGED, &avg.scores, &mut rows);
    formats::write_csv(
        &ctx.dir.join(SCORES),
        &["period", "level", "code", "index", "value"],
        rows,
    )?;
    formats::write_rejects(&ctx.dir.join("rejects.csv"), &rejects)?;
    formats::write_json(
        &ctx.dir.join("diagnostics.json"),
        &Diagnostics {
            settings: cfg,
            trade_rows: counts.rows,
            rejected_rows: rejects.len(),
            years,
            skipped_years: skipped,
            excluded_industries: avg
                .excluded_industries
                .iter()
                .map(|&i| reg.industry_code(i).to_string())
                .collect(),
            excluded_countries: avg
                .excluded_countries
                .iter()
                .map(|&c| reg.country_code(c).to_string())
                .collect(),
        },
    )?;
    Ok(warnings)
}

/// Averaged industry scores `(efi, eci)` from the score table.
pub fn read_averaged(
    path: &Path,
    reg: &Registry,
) -> Result<BTreeMap<IndustryId, (Option<f64>, Option<f64>)>> {
    let mut out: BTreeMap<IndustryId, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for r in formats::read_table(path)? {
        if r["period"] != AVERAGED || r["level"] != "industry" {
            continue;
        }
        let i = reg
            .industry_id(&r["code"])
            .ok_or_else(|| anyhow!("unknown industry {:?}", r["code"]))?;
        let v = formats::parse_opt(&r["value"])?;
        let e = out.entry(i).or_default();
        match r["index"].as_str() {
            "efi" => e.0 = v,
            "eci" => e.1 = v,
            _ => {}
        }
    }
    Ok(out)
}
