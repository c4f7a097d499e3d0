use std::collections::BTreeMap;

use anyhow::Result;
use serde::Serialize;
use synergy_core::iotensor::{
    log_fluctuations, Deflator, FinalDemandTable, FlowSeries, TransactionTable,
};

use super::Ctx;
use crate::formats::{self, ReadCounts, RowReject};

pub const FLOWS: &str = "flows.csv";
pub const FLUCTUATIONS: &str = "fluctuations.csv";

#[derive(Serialize)]
struct Summary {
    period: [i32; 2],
    countries: usize,
    industries: usize,
    transactions: BTreeMap<String, ReadCounts>,
    final_demand: BTreeMap<String, ReadCounts>,
    deflated: bool,
    flow_series: usize,
    present_zero_years: usize,
    invalid_fluctuations: usize,
}

pub(super) fn run(ctx: &Ctx) -> Result<Vec<String>> {
    let cfg = ctx.cfg;
    let reg = &ctx.registry;
    let schema = &cfg.schema;
    let mut rejects: Vec<RowReject> = Vec::new();
    let mut warnings = Vec::new();

    let mut table = TransactionTable::new(reg.period());
    let mut tx_counts = BTreeMap::new();
    for p in &cfg.inputs.transactions {
        let c = formats::read_transactions(
            &cfg.resolve(p),
            &schema.transactions,
            schema.delimiter,
            schema.has_headers,
            reg,
            &mut rejects,
            |r| table.push(r),
        )?;
        tx_counts.insert(p.display().to_string(), c);
    }
    let mut demand = FinalDemandTable::new();
    let mut fd_counts = BTreeMap::new();
    for p in &cfg.inputs.final_demand {
        let c = formats::read_final_demand(
            &cfg.resolve(p),
            &schema.final_demand,
            schema.delimiter,
            schema.has_headers,
            reg,
            &mut rejects,
            |r| demand.push(r),
        )?;
        fd_counts.insert(p.display().to_string(), c);
    }
    let deflator = match &cfg.inputs.deflator {
        Some(p) => Some(formats::read_deflator(&cfg.resolve(p), reg, &mut rejects)?.0),
        None => None,
    };
    if !rejects.is_empty() {
        warnings.push(format!(
            "{} input rows rejected (see rejects.csv)",
            rejects.len()
        ));
    }

    let prepare = |s: FlowSeries, d: &Option<Deflator>| match d {
        Some(d) => s.deflated(d),
        None => s,
    };
    let mut flows = Vec::new();
    for c in reg.countries() {
        for j in reg.industries() {
            flows.push(prepare(table.total_output(&demand, j, c), &deflator));
            for i in reg.industries() {
                flows.push(prepare(table.total_input_inflow(i, j, c), &deflator));
            }
        }
    }
    let fluct = flows
        .iter()
        .map(log_fluctuations)
        .collect::<Result<Vec<_>, _>>()?;

    formats::write_csv(
        &ctx.dir.join(FLOWS),
        &formats::SERIES_HEADER,
        flows.iter().flat_map(|s| formats::flow_rows(reg, s)),
    )?;
    formats::write_csv(
        &ctx.dir.join(FLUCTUATIONS),
        &formats::SERIES_HEADER,
        fluct.iter().flat_map(|s| formats::fluctuation_rows(reg, s)),
    )?;
    formats::write_rejects(&ctx.dir.join("rejects.csv"), &rejects)?;

    let present_zero_years = flows
        .iter()
        .map(|s| s.recorded.iter().filter(|r| !**r).count())
        .sum();
    let invalid_fluctuations = fluct
        .iter()
        .map(|s| s.valid.iter().filter(|v| !**v).count())
        .sum();
    if invalid_fluctuations > 0 {
        warnings.push(format!(
            "{invalid_fluctuations} log-fluctuations invalid (nonpositive flow)"
        ));
    }
    let period = reg.period();
    formats::write_json(
        &ctx.dir.join("ingest.json"),
        &Summary {
            period: [period.start, period.end],
            countries: reg.country_count(),
            industries: reg.industry_count(),
            transactions: tx_counts,
            final_demand: fd_counts,
            deflated: deflator.is_some(),
            flow_series: flows.len(),
            present_zero_years,
            invalid_fluctuations,
        },
    )?;
    Ok(warnings)
}
