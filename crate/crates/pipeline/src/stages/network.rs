use std::collections::{BTreeMap, BTreeSet};
use std::fs;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use synergy_core::iotensor::{IndustryId, Sector};
use synergy_core::seed::derive_seed;
use synergy_core::stats;
use synergy_core::synnet::{
    backbone_significance, build_synergy_network, clustering_coefficients, mixing_ttest,
    network_stats, null_ensemble, sector_mixing, BackboneNetwork, EdgeSignificance, NetworkError,
    NetworkStats, SynergyNetwork,
};

use super::{synergy, Ctx, Stage};
use crate::config::NetworkConfig;
use crate::formats::{self, fmt_f64, fmt_opt};

/// File stem of the network of `(industry, cluster)`: the industry code
/// with characters outside `[A-Za-z0-9_-]` replaced by `_`, then the
/// cluster.
pub fn file_stem(industry_code: &str, cluster: usize) -> String {
    let code: String = industry_code
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{code}_c{cluster}")
}

#[derive(Serialize)]
struct NetworkHeader<'a> {
    industry: &'a str,
    cluster: usize,
    nodes: Vec<&'a str>,
    unit: &'a str,
    missing_pairs: Vec<[&'a str; 2]>,
}

#[derive(Serialize)]
struct BackboneHeader<'a> {
    industry: &'a str,
    cluster: usize,
    nodes: Vec<&'a str>,
    method: &'a NetworkConfig,
    source_edges: usize,
    kept_edges: usize,
}

struct Built {
    industry: IndustryId,
    cluster: usize,
    net: SynergyNetwork,
    missing: Vec<(IndustryId, IndustryId)>,
    significance: Vec<EdgeSignificance>,
    backbone: BackboneNetwork,
    stats: NetworkStats,
    null_clustering: f64,
    null_rigid: bool,
    mean_swaps: f64,
    mixing: Option<[f64; 10]>,
    null_mixing: Vec<Option<[f64; 10]>>,
    warnings: Vec<String>,
}

fn mean_clustering(bb: &BackboneNetwork) -> f64 {
    stats::mean(&clustering_coefficients(bb))
}

fn build(
    ctx: &Ctx,
    key: (IndustryId, usize),
    scores: &[&synergy::ScoreRow],
    nodes: &[IndustryId],
    sectors: &[Sector],
) -> Result<Built> {
    let cfg = &ctx.cfg.network;
    let reg = &ctx.registry;
    let (j, g) = key;
    let stem = file_stem(reg.industry_code(j), g);
    let list: Vec<_> = scores
        .iter()
        .filter_map(|s| s.pid.map(|p| (s.pair.0, s.pair.1, p)))
        .collect();
    let (net, missing) = build_synergy_network(nodes, &list, Some(j), Some(g))?;
    let mut warnings = Vec::new();
    if !missing.is_empty() {
        warnings.push(format!("{stem}: {} pairs without a score", missing.len()));
    }
    let significance = match backbone_significance(&net, cfg.backbone()) {
        Ok(s) => s,
        Err(NetworkError::EmptyNetwork) => {
            warnings.push(format!("{stem}: no positive synergy, empty backbone"));
            Vec::new()
        }
        Err(e) => return Err(e.into()),
    };
    let kept: Vec<(usize, usize)> = significance
        .iter()
        .filter(|e| e.kept)
        .map(|e| (e.i, e.j))
        .collect();
    let mut backbone = BackboneNetwork::from_edges(nodes.to_vec(), &kept);
    backbone.industry = Some(j);
    backbone.cluster = Some(g);
    for e in significance.iter().filter(|e| e.kept) {
        backbone.provenance[(e.i, e.j)] = e.weight;
        backbone.provenance[(e.j, e.i)] = e.weight;
    }
    let stats = network_stats(&net, &backbone, cfg.stats_options());
    warnings.extend(stats.warnings.iter().map(|w| format!("{stem}: {w}")));

    let seed = derive_seed(
        ctx.cfg.seed,
        "network",
        &format!("{}/{}", reg.industry_code(j), g),
    );
    let null = null_ensemble(&backbone, cfg.null_samples, seed)?;
    let degrees = backbone.degrees();
    if null.samples.iter().any(|s| s.degrees() != degrees) {
        bail!("{stem}: null sample changed the degree sequence");
    }
    let mixing = sector_mixing(&backbone, sectors)?;
    let null_mixing = null
        .samples
        .iter()
        .map(|s| sector_mixing(s, sectors))
        .collect::<Result<Vec<_>, _>>()?;
    let null_clustering =
        stats::mean(&null.samples.iter().map(mean_clustering).collect::<Vec<_>>());
    let mean_swaps = stats::mean(
        &null
            .accepted_swaps
            .iter()
            .map(|&a| a as f64)
            .collect::<Vec<_>>(),
    );
    Ok(Built {
        industry: j,
        cluster: g,
        net,
        missing,
        significance,
        backbone,
        stats,
        null_clustering,
        null_rigid: null.rigid,
        mean_swaps,
        mixing,
        null_mixing,
        warnings,
    })
}

#[derive(Serialize)]
struct Sidecar<'a> {
    settings: &'a NetworkConfig,
    seed: u64,
    networks: BTreeMap<String, Vec<String>>,
}

pub(super) fn run(ctx: &Ctx) -> Result<Vec<String>> {
    let reg = &ctx.registry;
    let scores = synergy::read_scores(&ctx.upstream(Stage::Synergy, synergy::SCORES)?, reg)?;
    let unit = scores
        .iter()
        .find_map(|s| s.pid.map(|p| p.unit.as_str()))
        .unwrap_or("nats");
    let mut groups: BTreeMap<(IndustryId, usize), Vec<&synergy::ScoreRow>> = BTreeMap::new();
    for s in &scores {
        groups.entry((s.industry, s.cluster)).or_default().push(s);
    }
    let nodes: Vec<IndustryId> = reg.industries().collect();
    let sectors: Vec<Sector> = nodes.iter().map(|&i| reg.sector(i)).collect();
    let stems: BTreeSet<String> = groups
        .keys()
        .map(|&(j, g)| file_stem(reg.industry_code(j), g))
        .collect();
    if stems.len() != groups.len() {
        bail!("industry codes collide after file-name sanitizing");
    }

    let keys: Vec<(IndustryId, usize)> = groups.keys().copied().collect();
    let built: Vec<Result<Built>> = ctx.pool.install(|| {
        keys.par_iter()
            .map(|&k| {
                build(ctx, k, &groups[&k], &nodes, &sectors)
                    .with_context(|| format!("network {}", file_stem(reg.industry_code(k.0), k.1)))
            })
            .collect()
    });
    let built = built.into_iter().collect::<Result<Vec<_>>>()?;

    let net_dir = ctx.dir.join("networks");
    let bb_dir = ctx.dir.join("backbones");
    fs::create_dir_all(&net_dir)?;
    fs::create_dir_all(&bb_dir)?;
    let codes: Vec<&str> = nodes.iter().map(|&i| reg.industry_code(i)).collect();
    let mut stat_rows = Vec::new();
    let mut summary_rows = Vec::new();
    let mut warnings = Vec::new();
    let mut per_network = BTreeMap::new();
    for b in &built {
        let code = reg.industry_code(b.industry);
        let stem = file_stem(code, b.cluster);
        formats::write_csv(
            &net_dir.join(format!("{stem}.csv")),
            &["node_i", "node_j", "weight"],
            b.net
                .edges()
                .into_iter()
                .map(|(i, j, w)| vec![codes[i].to_string(), codes[j].to_string(), fmt_f64(w)]),
        )?;
        formats::write_json(
            &net_dir.join(format!("{stem}.json")),
            &NetworkHeader {
                industry: code,
                cluster: b.cluster,
                nodes: codes.clone(),
                unit,
                missing_pairs: b
                    .missing
                    .iter()
                    .map(|&(x, y)| [reg.industry_code(x), reg.industry_code(y)])
                    .collect(),
            },
        )?;
        formats::write_csv(
            &bb_dir.join(format!("{stem}.csv")),
            &["node_i", "node_j", "weight", "provenance", "score", "sdev"],
            b.significance.iter().map(|e| {
                vec![
                    codes[e.i].to_string(),
                    codes[e.j].to_string(),
                    u8::from(e.kept).to_string(),
                    fmt_f64(e.weight),
                    fmt_f64(e.score),
                    fmt_f64(e.sdev),
                ]
            }),
        )?;
        formats::write_json(
            &bb_dir.join(format!("{stem}.json")),
            &BackboneHeader {
                industry: code,
                cluster: b.cluster,
                nodes: codes.clone(),
                method: &ctx.cfg.network,
                source_edges: b.significance.len(),
                kept_edges: b.backbone.edge_count(),
            },
        )?;
        let s = &b.stats;
        let strengths = b.net.strengths();
        for (n, name) in codes.iter().enumerate() {
            stat_rows.push(vec![
                code.to_string(),
                b.cluster.to_string(),
                name.to_string(),
                fmt_f64(s.centrality[n]),
                fmt_f64(s.clustering[n]),
                fmt_f64(s.mean_synergy[n]),
                fmt_f64(strengths[n]),
                b.backbone.degrees()[n].to_string(),
                fmt_f64(s.spectral_radius),
                fmt_f64(s.network_variance),
            ]);
        }
        let weights: Vec<f64> = b.net.edges().iter().map(|e| e.2).collect();
        summary_rows.push(vec![
            code.to_string(),
            b.cluster.to_string(),
            codes.len().to_string(),
            weights.len().to_string(),
            b.backbone.edge_count().to_string(),
            fmt_f64(if weights.is_empty() {
                0.0
            } else {
                stats::mean(&weights)
            }),
            fmt_f64(s.spectral_radius),
            fmt_f64(s.network_variance),
            fmt_f64(mean_clustering(&b.backbone)),
            fmt_f64(b.null_clustering),
            b.null_rigid.to_string(),
            fmt_f64(b.mean_swaps),
            b.missing.len().to_string(),
        ]);
        warnings.extend(b.warnings.iter().cloned());
        per_network.insert(stem, b.warnings.clone());
    }
    formats::write_csv(
        &ctx.dir.join("stats.csv"),
        &[
            "industry",
            "cluster",
            "node",
            "centrality",
            "clustering",
            "mean_synergy",
            "strength",
            "degree",
            "spectral_radius",
            "network_variance",
        ],
        stat_rows,
    )?;
    formats::write_csv(
        &ctx.dir.join("summary.csv"),
        &[
            "industry",
            "cluster",
            "nodes",
            "edges",
            "backbone_edges",
            "mean_weight",
            "spectral_radius",
            "network_variance",
            "avg_clustering",
            "null_avg_clustering",
            "null_rigid",
            "null_mean_swaps",
            "missing_pairs",
        ],
        summary_rows,
    )?;

    let empirical: Vec<Option<[f64; 10]>> = built.iter().map(|b| b.mixing).collect();
    let null: Vec<Option<[f64; 10]>> = built
        .iter()
        .flat_map(|b| b.null_mixing.iter().copied())
        .collect();
    formats::write_csv(
        &ctx.dir.join("mixing.csv"),
        &[
            "sector_1",
            "sector_2",
            "empirical_mean",
            "null_mean",
            "empirical_count",
            "null_count",
            "t",
            "df",
            "p_value",
            "stars",
        ],
        mixing_ttest(&empirical, &null).into_iter().map(|r| {
            vec![
                r.pair.0.as_str().to_string(),
                r.pair.1.as_str().to_string(),
                fmt_f64(r.empirical_mean),
                fmt_f64(r.null_mean),
                r.empirical_count.to_string(),
                r.null_count.to_string(),
                fmt_opt(r.t),
                fmt_opt(r.df),
                fmt_opt(r.p_value),
                r.stars.as_str().to_string(),
            ]
        }),
    )?;
    formats::write_json(
        &ctx.dir.join("network.json"),
        &Sidecar {
            settings: &ctx.cfg.network,
            seed: ctx.cfg.seed,
            networks: per_network,
        },
    )?;
    Ok(warnings)
}
