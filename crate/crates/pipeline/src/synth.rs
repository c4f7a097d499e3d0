//! Synthetic input worlds with planted synergy.
//!
//! Countries fall into `groups` technology groups (country index modulo
//! `groups`). For industry `j`, group `g` uses the high-synergy technology
//! when `(g + j) % groups < high[j]` and the redundant one otherwise.
//! Log-fluctuations are drawn per country, industry and year, and the flow
//! levels are integrated from them, so ingest recovers them exactly.
//!
//! High synergy: with a shared shock `s`, a common nuisance `n` and small
//! idiosyncratic noise, `x_i = a_i s + n + 0.1 e_i` and `y = s + 0.1 u`.
//! For every input pair, `y` is a noisy weighted sum of the two inputs
//! (weights of opposite sign), and neither input alone says much about it.
//!
//! Redundant: `x_i = f + 0.1 e_i` and `y = f + u` share one factor.
//!
//! Export fitness follows the planted level: industries are ranked by their
//! number of high-synergy groups, and a country mostly exports strongly the
//! industries ranked below its capability.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Result;
use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::json;
use synergy_core::gpid::{pid_mmi, CovarianceSummary};
use synergy_core::iotensor::Sector;
use synergy_core::linalg::Matrix;
use synergy_core::seed::{derive_seed, rng};

use crate::formats::{fmt_f64, write_csv};

const MU: f64 = 0.1;
const SIGMA: f64 = 0.01;
const NUISANCE_VAR: f64 = 4.0;
const BASE_INFLOW: f64 = 10.0;
const BASE_OUTPUT: f64 = 5000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct WorldSpec {
    pub seed: u64,
    pub countries: usize,
    pub sectors: Vec<Sector>,
    pub start_year: i32,
    pub years: usize,
    pub groups: usize,
    /// High-synergy group count per industry.
    pub high: Vec<usize>,
    /// Fixed cluster size bounds written to the config, if any.
    pub cluster_size: Option<usize>,
    pub shuffles: usize,
    pub min_rows: usize,
    pub null_samples: usize,
}

impl WorldSpec {
    /// 40 countries in 4 groups, 8 industries, 30 years; half of the
    /// (industry, group) technologies are high-synergy.
    pub fn planted(seed: u64) -> Self {
        use Sector::*;
        Self {
            seed,
            countries: 40,
            sectors: vec![
                Primary, Primary, Secondary, Secondary, Secondary, Tertiary, Tertiary, Other,
            ],
            start_year: 1990,
            years: 30,
            groups: 4,
            high: vec![0, 0, 1, 1, 3, 3, 4, 4],
            cluster_size: Some(10),
            shuffles: 100,
            min_rows: 200,
            null_samples: 100,
        }
    }

    /// 3 countries, 3 industries, 12 years.
    pub fn small(seed: u64) -> Self {
        Self {
            seed,
            countries: 3,
            sectors: vec![Sector::Primary, Sector::Secondary, Sector::Tertiary],
            start_year: 2000,
            years: 12,
            groups: 2,
            high: vec![0, 1, 2],
            cluster_size: None,
            shuffles: 20,
            min_rows: 10,
            null_samples: 20,
        }
    }

    pub fn industries(&self) -> usize {
        self.sectors.len()
    }

    pub fn country_code(&self, c: usize) -> String {
        format!("C{:02}", c + 1)
    }

    pub fn industry_code(&self, j: usize) -> String {
        format!("I{:02}", j + 1)
    }

    pub fn group(&self, c: usize) -> usize {
        c % self.groups
    }

    pub fn is_high(&self, industry: usize, group: usize) -> bool {
        (group + industry) % self.groups < self.high[industry]
    }

    /// Shock loading of input `i` in the high-synergy technology.
    fn loading(i: usize) -> f64 {
        0.5 + 0.25 * i as f64
    }

    /// Analytic `(x_a, x_b, y)` covariance of one input pair.
    pub fn pair_covariance(high: bool, a: usize, b: usize) -> Matrix {
        if high {
            let (la, lb) = (Self::loading(a), Self::loading(b));
            let v = NUISANCE_VAR;
            Matrix::from_rows(
                3,
                3,
                vec![
                    la * la + v + 0.01,
                    la * lb + v,
                    la,
                    la * lb + v,
                    lb * lb + v + 0.01,
                    lb,
                    la,
                    lb,
                    1.01,
                ],
            )
        } else {
            Matrix::from_rows(3, 3, vec![1.01, 1.0, 1.0, 1.0, 1.01, 1.0, 1.0, 1.0, 2.0])
        }
    }

    /// Analytic synergy of one pair, in nats.
    pub fn pair_synergy(high: bool, a: usize, b: usize) -> f64 {
        let cov = CovarianceSummary::from_matrix(Self::pair_covariance(high, a, b), 0)
            .expect("valid covariance");
        pid_mmi(&cov).expect("analytic decomposition").synergy_raw
    }

    /// Mean analytic pair synergy of a technology.
    pub fn planted_synergy(&self, high: bool) -> f64 {
        let n = self.industries();
        let mut total = 0.0;
        let mut count = 0;
        for a in 0..n {
            for b in a + 1..n {
                total += Self::pair_synergy(high, a, b);
                count += 1;
            }
        }
        total / count as f64
    }

    /// Industries by increasing planted level; ties keep index order.
    fn difficulty_rank(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.industries()).collect();
        order.sort_by_key(|&j| (self.high[j], j));
        let mut rank = vec![0; order.len()];
        for (r, &j) in order.iter().enumerate() {
            rank[j] = r;
        }
        rank
    }

    /// Number of industries country `c` exports strongly (at least one).
    fn capability(&self, c: usize) -> usize {
        1 + (c / self.groups) % self.industries()
    }
}

fn normal(r: &mut impl Rng) -> f64 {
    r.sample(StandardNormal)
}

/// Standardised fluctuation draws `(inputs, output)` for one year.
fn draw(high: bool, n: usize, r: &mut impl Rng) -> (Vec<f64>, f64) {
    if high {
        let s = normal(r);
        let nu = NUISANCE_VAR.sqrt() * normal(r);
        let scale = (NUISANCE_VAR + 2.0).sqrt();
        let x = (0..n)
            .map(|i| (WorldSpec::loading(i) * s + nu + 0.1 * normal(r)) / scale)
            .collect();
        (x, s + 0.1 * normal(r))
    } else {
        let f = normal(r);
        let x = (0..n).map(|_| f + 0.1 * normal(r)).collect();
        (x, (f + normal(r)) / 2f64.sqrt())
    }
}

/// Writes the world below `dir` and returns the path of its config file.
pub fn write_world(spec: &WorldSpec, dir: &Path) -> Result<PathBuf> {
    let inputs = dir.join("inputs");
    fs::create_dir_all(&inputs)?;
    let nc = spec.countries;
    let ni = spec.industries();
    let years: Vec<i32> = (0..spec.years as i32)
        .map(|t| spec.start_year + t)
        .collect();
    let cc: Vec<String> = (0..nc).map(|c| spec.country_code(c)).collect();
    let ic: Vec<String> = (0..ni).map(|j| spec.industry_code(j)).collect();

    write_csv(
        &inputs.join("countries.csv"),
        &["code"],
        cc.iter().map(|c| vec![c.clone()]),
    )?;
    write_csv(
        &inputs.join("industries.csv"),
        &["code", "sector"],
        ic.iter()
            .zip(&spec.sectors)
            .map(|(c, s)| vec![c.clone(), s.as_str().to_string()]),
    )?;

    // levels[c][j][0] is the output of (c, j); levels[c][j][1 + i] the
    // inflow from industry i.
    let mut levels = vec![vec![vec![Vec::with_capacity(years.len()); ni + 1]; ni]; nc];
    for c in 0..nc {
        let g = spec.group(c);
        for j in 0..ni {
            let mut r = rng(derive_seed(
                spec.seed,
                "synth",
                &format!("{}/{}", cc[c], ic[j]),
            ));
            let high = spec.is_high(j, g);
            let mut cur = vec![0.0; ni + 1];
            cur[0] = BASE_OUTPUT * (0.1 * normal(&mut r)).exp();
            for i in 0..ni {
                let share = f64::from(1u32 << ((g + i) % 4));
                cur[1 + i] = BASE_INFLOW * share * (0.1 * normal(&mut r)).exp();
            }
            for t in 0..years.len() {
                if t > 0 {
                    let (x, y) = draw(high, ni, &mut r);
                    cur[0] *= (MU + SIGMA * y).exp();
                    for i in 0..ni {
                        cur[1 + i] *= (MU + SIGMA * x[i]).exp();
                    }
                }
                for (k, v) in cur.iter().enumerate() {
                    levels[c][j][k].push(*v);
                }
            }
        }
    }

    let mut tx = Vec::new();
    let mut fd = Vec::new();
    for c in 0..nc {
        for (t, y) in years.iter().enumerate() {
            for j in 0..ni {
                for i in 0..ni {
                    tx.push(vec![
                        y.to_string(),
                        cc[c].clone(),
                        ic[i].clone(),
                        cc[c].clone(),
                        ic[j].clone(),
                        fmt_f64(levels[c][j][1 + i][t]),
                    ]);
                }
            }
            for i in 0..ni {
                let sales: f64 = (0..ni).map(|j| levels[c][j][1 + i][t]).sum();
                let demand = (levels[c][i][0][t] - sales).max(0.0);
                fd.push(vec![
                    y.to_string(),
                    cc[c].clone(),
                    ic[i].clone(),
                    cc[c].clone(),
                    fmt_f64(demand),
                ]);
            }
        }
    }
    write_csv(
        &inputs.join("transactions.csv"),
        &[
            "year",
            "source_country",
            "source_industry",
            "dest_country",
            "dest_industry",
            "value",
        ],
        tx,
    )?;
    write_csv(
        &inputs.join("final_demand.csv"),
        &[
            "year",
            "source_country",
            "source_industry",
            "demand_country",
            "value",
        ],
        fd,
    )?;

    let mut r = rng(derive_seed(spec.seed, "synth", "indicators"));
    let mut ind = Vec::new();
    for c in 0..nc {
        let g = spec.group(c) as i32;
        for y in &years {
            let gni = 1000.0 * 3f64.powi(g) * (0.05 * normal(&mut r)).exp();
            let eff = (1.0 + 0.5 * f64::from(g)) * (0.05 * normal(&mut r)).exp();
            ind.push(vec![
                cc[c].clone(),
                y.to_string(),
                "gni_per_capita".into(),
                fmt_f64(gni),
            ]);
            ind.push(vec![
                cc[c].clone(),
                y.to_string(),
                "labor_efficiency".into(),
                fmt_f64(eff),
            ]);
        }
    }
    write_csv(
        &inputs.join("indicators.csv"),
        &["country", "year", "indicator", "value"],
        ind,
    )?;

    write_csv(
        &inputs.join("product_mapping.csv"),
        &["product", "industry"],
        ic.iter().enumerate().flat_map(|(j, code)| {
            ["a", "b"].map(|s| vec![format!("P{:02}{s}", j + 1), code.clone()])
        }),
    )?;
    let rank = spec.difficulty_rank();
    let mut r = rng(derive_seed(spec.seed, "synth", "trade"));
    let mut trade = Vec::new();
    for y in &years {
        for c in 0..nc {
            for j in 0..ni {
                // strong exporter with a probability falling off across
                // the capability threshold, so the matrix is only nearly nested
                let gap = spec.capability(c) as f64 - rank[j] as f64 - 0.5;
                let strong = r.random::<f64>() < 1.0 / (1.0 + (-1.5 * gap).exp());
                let base = if strong { 100.0 } else { 2.0 };
                for (s, part) in [("a", 0.6), ("b", 0.4)] {
                    let v = base * part * (0.2 * normal(&mut r)).exp();
                    trade.push(vec![
                        y.to_string(),
                        cc[c].clone(),
                        format!("P{:02}{s}", j + 1),
                        fmt_f64(v),
                    ]);
                }
            }
        }
    }
    write_csv(
        &inputs.join("trade.csv"),
        &["year", "exporter", "product", "value"],
        trade,
    )?;

    let (hi, lo) = (spec.planted_synergy(true), spec.planted_synergy(false));
    write_csv(
        &dir.join("planted.csv"),
        &["industry", "group", "technology", "synergy"],
        (0..ni).flat_map(|j| {
            let ic = &ic;
            (0..spec.groups).map(move |g| {
                let high = spec.is_high(j, g);
                vec![
                    ic[j].clone(),
                    g.to_string(),
                    if high { "synergy" } else { "redundant" }.to_string(),
                    fmt_f64(if high { hi } else { lo }),
                ]
            })
        }),
    )?;
    write_csv(
        &dir.join("planted_countries.csv"),
        &["country", "group"],
        (0..nc).map(|c| vec![cc[c].clone(), spec.group(c).to_string()]),
    )?;

    let mut cluster = json!({ "k": spec.groups });
    if let Some(s) = spec.cluster_size {
        cluster["min_size"] = json!(s);
        cluster["max_size"] = json!(s);
    }
    let config = json!({
        "inputs": {
            "countries": "inputs/countries.csv",
            "industries": "inputs/industries.csv",
            "transactions": "inputs/transactions.csv",
            "final_demand": "inputs/final_demand.csv",
            "indicators": "inputs/indicators.csv",
            "trade": "inputs/trade.csv",
            "product_mapping": "inputs/product_mapping.csv",
        },
        "period": { "start": years[0], "end": years[years.len() - 1] },
        "output_dir": "artifacts",
        "seed": spec.seed,
        "cluster": cluster,
        "synergy": { "shuffles": spec.shuffles, "min_rows": spec.min_rows },
        "network": { "null_samples": spec.null_samples },
    });
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&config)? + "\n")?;
    Ok(path)
}
