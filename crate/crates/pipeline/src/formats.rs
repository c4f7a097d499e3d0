//! Delimited-text and JSON readers and writers.
//!
//! Input readers collect malformed rows with their line numbers instead of
//! failing; only an unreadable file is fatal. Floats are written in the
//! shortest form that parses back to the same value, so stage outputs can be
//! re-read without loss.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use synergy_core::ecx::TradeRecord;
use synergy_core::iotensor::{
    CountryId, Deflator, FinalDemandColumns, FinalDemandRecord, FlowSeries, FluctuationSeries,
    FluctuationSet, IndustryId, Period, Registry, RowError, Sector, SeriesKey, TransactionColumns,
    TransactionRecord, Year,
};

use crate::config::{ColumnRef, Delimiter, FinalDemandSchema, TransactionSchema};

/// A row that could not be used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowReject {
    pub file: String,
    pub line: u64,
    pub error: String,
}

/// Rows read and rejected for one input file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ReadCounts {
    pub rows: usize,
    pub rejected: usize,
}

pub fn fmt_f64(v: f64) -> String {
    serde_json::Number::from_f64(v).map_or_else(String::new, |n| n.to_string())
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, fmt_f64)
}

pub fn parse_opt(s: &str) -> Result<Option<f64>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| anyhow!("bad number {s:?}"))
}

fn detect(path: &Path, setting: Delimiter) -> Result<u8> {
    Ok(match setting {
        Delimiter::Comma => b',',
        Delimiter::Tab => b'\t',
        Delimiter::Auto => {
            if path
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("tsv"))
            {
                return Ok(b'\t');
            }
            let mut first = String::new();
            BufReader::new(open(path)?).read_line(&mut first)?;
            if first.contains('\t') && !first.contains(',') {
                b'\t'
            } else {
                b','
            }
        }
    })
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("cannot open {}", path.display()))
}

fn reader(path: &Path, delimiter: Delimiter, headers: bool) -> Result<csv::Reader<File>> {
    let d = detect(path, delimiter)?;
    Ok(csv::ReaderBuilder::new()
        .delimiter(d)
        .has_headers(headers)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(open(path)?))
}

fn header_index(headers: &csv::StringRecord, name: &str, file: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| anyhow!("{}: no column named {name:?}", file.display()))
}

fn column(c: &ColumnRef, headers: Option<&csv::StringRecord>, file: &Path) -> Result<usize> {
    match (c, headers) {
        (ColumnRef::Index(i), _) => Ok(*i),
        (ColumnRef::Name(n), Some(h)) => header_index(h, n, file),
        (ColumnRef::Name(n), None) => bail!(
            "{}: column {n:?} given by name but the file has no header row",
            file.display()
        ),
    }
}

/// Visits every data row as trimmed fields with its 1-based line number.
/// Undecodable rows go to `rejects`.
fn for_each_row(
    rdr: &mut csv::Reader<File>,
    file: &Path,
    rejects: &mut Vec<RowReject>,
    counts: &mut ReadCounts,
    mut f: impl FnMut(&[&str], u64) -> std::result::Result<(), String>,
) {
    let name = file.file_name().map_or_else(
        || file.display().to_string(),
        |n| n.to_string_lossy().into_owned(),
    );
    for (n, rec) in rdr.records().enumerate() {
        counts.rows += 1;
        let outcome = match &rec {
            Ok(r) => {
                let line = r.position().map_or(n as u64 + 1, |p| p.line());
                let fields: Vec<&str> = r.iter().collect();
                f(&fields, line).map_err(|e| (line, e))
            }
            Err(e) => Err((
                e.position().map_or(n as u64 + 1, |p| p.line()),
                e.to_string(),
            )),
        };
        if let Err((line, error)) = outcome {
            counts.rejected += 1;
            rejects.push(RowReject {
                file: name.clone(),
                line,
                error,
            });
        }
    }
}

/// Reads a delimited file with a header row into maps of named fields.
fn read_named(
    path: &Path,
    required: &[&str],
    rejects: &mut Vec<RowReject>,
    counts: &mut ReadCounts,
    mut f: impl FnMut(&BTreeMap<&str, &str>) -> std::result::Result<(), String>,
) -> Result<()> {
    let mut rdr = reader(path, Delimiter::Auto, true)?;
    let headers = rdr
        .headers()
        .with_context(|| format!("cannot read header of {}", path.display()))?
        .clone();
    for r in required {
        header_index(&headers, r, path)?;
    }
    let names: Vec<String> = headers.iter().map(str::to_string).collect();
    for_each_row(&mut rdr, path, rejects, counts, |fields, _| {
        let row: BTreeMap<&str, &str> = names
            .iter()
            .map(String::as_str)
            .zip(fields.iter().copied())
            .collect();
        for r in required {
            if !row.contains_key(r) {
                return Err(format!("missing field {r}"));
            }
        }
        f(&row)
    });
    Ok(())
}

pub fn read_registry(
    countries: &Path,
    industries: &Path,
    sector_map: Option<&Path>,
    period: Period,
) -> Result<Registry> {
    let mut rejects = Vec::new();
    let mut counts = ReadCounts::default();
    let mut codes = Vec::new();
    read_named(countries, &["code"], &mut rejects, &mut counts, |r| {
        codes.push(r["code"].to_string());
        Ok(())
    })?;
    let mut inds: Vec<(String, Sector)> = Vec::new();
    read_named(industries, &["code"], &mut rejects, &mut counts, |r| {
        let sector = match r.get("sector") {
            Some(s) if !s.is_empty() => s
                .parse()
                .map_err(|e: synergy_core::iotensor::RegistryError| e.to_string())?,
            _ => Sector::Other,
        };
        inds.push((r["code"].to_string(), sector));
        Ok(())
    })?;
    if let Some(map) = sector_map {
        let mut sectors = BTreeMap::new();
        read_named(
            map,
            &["industry", "sector"],
            &mut rejects,
            &mut counts,
            |r| {
                let s: Sector = r["sector"]
                    .parse()
                    .map_err(|e: synergy_core::iotensor::RegistryError| e.to_string())?;
                sectors.insert(r["industry"].to_string(), s);
                Ok(())
            },
        )?;
        for (code, s) in &mut inds {
            if let Some(v) = sectors.get(code) {
                *s = *v;
            }
        }
    }
    if let Some(r) = rejects.first() {
        bail!("registry {} line {}: {}", r.file, r.line, r.error);
    }
    Ok(Registry::new(codes, inds, period)?)
}

fn transaction_columns(
    s: &TransactionSchema,
    h: Option<&csv::StringRecord>,
    f: &Path,
) -> Result<TransactionColumns> {
    Ok(TransactionColumns {
        year: column(&s.year, h, f)?,
        source_country: column(&s.source_country, h, f)?,
        source_industry: column(&s.source_industry, h, f)?,
        dest_country: column(&s.dest_country, h, f)?,
        dest_industry: column(&s.dest_industry, h, f)?,
        value: column(&s.value, h, f)?,
    })
}

fn final_demand_columns(
    s: &FinalDemandSchema,
    h: Option<&csv::StringRecord>,
    f: &Path,
) -> Result<FinalDemandColumns> {
    Ok(FinalDemandColumns {
        year: column(&s.year, h, f)?,
        source_country: column(&s.source_country, h, f)?,
        source_industry: column(&s.source_industry, h, f)?,
        demand_country: column(&s.demand_country, h, f)?,
        value: column(&s.value, h, f)?,
    })
}

fn headers_of(
    rdr: &mut csv::Reader<File>,
    headers: bool,
    path: &Path,
) -> Result<Option<csv::StringRecord>> {
    if !headers {
        return Ok(None);
    }
    match rdr.headers() {
        Ok(h) => Ok(Some(h.clone())),
        Err(e) => Err(anyhow!("cannot read header of {}: {e}", path.display())),
    }
}

fn row_error(e: RowError) -> String {
    e.to_string()
}

pub fn read_transactions(
    path: &Path,
    schema: &TransactionSchema,
    delimiter: Delimiter,
    headers: bool,
    reg: &Registry,
    rejects: &mut Vec<RowReject>,
    mut sink: impl FnMut(TransactionRecord),
) -> Result<ReadCounts> {
    let mut rdr = reader(path, delimiter, headers)?;
    // an empty file has no header row and no records
    if fs::metadata(path)?.len() == 0 {
        return Ok(ReadCounts::default());
    }
    let h = headers_of(&mut rdr, headers, path)?;
    let cols = transaction_columns(schema, h.as_ref(), path)?;
    let mut counts = ReadCounts::default();
    for_each_row(&mut rdr, path, rejects, &mut counts, |fields, _| {
        sink(TransactionRecord::from_fields(fields, &cols, reg).map_err(row_error)?);
        Ok(())
    });
    Ok(counts)
}

pub fn read_final_demand(
    path: &Path,
    schema: &FinalDemandSchema,
    delimiter: Delimiter,
    headers: bool,
    reg: &Registry,
    rejects: &mut Vec<RowReject>,
    mut sink: impl FnMut(FinalDemandRecord),
) -> Result<ReadCounts> {
    let mut rdr = reader(path, delimiter, headers)?;
    if fs::metadata(path)?.len() == 0 {
        return Ok(ReadCounts::default());
    }
    let h = headers_of(&mut rdr, headers, path)?;
    let cols = final_demand_columns(schema, h.as_ref(), path)?;
    let mut counts = ReadCounts::default();
    for_each_row(&mut rdr, path, rejects, &mut counts, |fields, _| {
        sink(FinalDemandRecord::from_fields(fields, &cols, reg).map_err(row_error)?);
        Ok(())
    });
    Ok(counts)
}

fn country(reg: &Registry, code: &str) -> std::result::Result<CountryId, String> {
    reg.country_id(code)
        .ok_or_else(|| format!("unknown country code {code:?}"))
}

fn industry(reg: &Registry, code: &str) -> std::result::Result<IndustryId, String> {
    reg.industry_id(code)
        .ok_or_else(|| format!("unknown industry code {code:?}"))
}

fn number(field: &str, raw: &str) -> std::result::Result<f64, String> {
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("field {field} has unparseable value {raw:?}"))
}

fn year(raw: &str) -> std::result::Result<Year, String> {
    raw.parse()
        .map_err(|_| format!("field year has unparseable value {raw:?}"))
}

/// Indicator rows `country, year, indicator, value`.
pub fn read_indicators(
    path: &Path,
    reg: &Registry,
    rejects: &mut Vec<RowReject>,
) -> Result<(Vec<(CountryId, Year, String, f64)>, ReadCounts)> {
    let mut out = Vec::new();
    let mut counts = ReadCounts::default();
    read_named(
        path,
        &["country", "year", "indicator", "value"],
        rejects,
        &mut counts,
        |r| {
            out.push((
                country(reg, r["country"])?,
                year(r["year"])?,
                r["indicator"].to_string(),
                number("value", r["value"])?,
            ));
            Ok(())
        },
    )?;
    Ok((out, counts))
}

/// Trade rows `year, exporter, product, value` with their line numbers.
/// Unknown exporters are rejected here; product mapping and value checks are
/// left to aggregation.
pub fn read_trade(
    path: &Path,
    reg: &Registry,
    rejects: &mut Vec<RowReject>,
) -> Result<(Vec<TradeRecord>, Vec<u64>, ReadCounts)> {
    let mut out = Vec::new();
    let mut lines = Vec::new();
    let mut counts = ReadCounts::default();
    let mut rdr = reader(path, Delimiter::Auto, true)?;
    let h = rdr.headers()?.clone();
    let idx: Vec<usize> = ["year", "exporter", "product", "value"]
        .iter()
        .map(|n| header_index(&h, n, path))
        .collect::<Result<_>>()?;
    for_each_row(&mut rdr, path, rejects, &mut counts, |f, line| {
        let get = |i: usize| f.get(idx[i]).copied().ok_or("missing field".to_string());
        out.push(TradeRecord {
            year: year(get(0)?)?,
            exporter: country(reg, get(1)?)?,
            product: get(2)?.to_string(),
            value: get(3)?.parse::<f64>().map_err(|_| {
                format!(
                    "field value has unparseable value {:?}",
                    get(3).unwrap_or("")
                )
            })?,
        });
        lines.push(line);
        Ok(())
    });
    Ok((out, lines, counts))
}

/// Product-to-industry rows `product, industry`.
pub fn read_product_mapping(
    path: &Path,
    reg: &Registry,
    rejects: &mut Vec<RowReject>,
) -> Result<(BTreeMap<String, IndustryId>, ReadCounts)> {
    let mut out = BTreeMap::new();
    let mut counts = ReadCounts::default();
    read_named(path, &["product", "industry"], rejects, &mut counts, |r| {
        let id = industry(reg, r["industry"])?;
        match out.insert(r["product"].to_string(), id) {
            Some(prev) if prev != id => Err(format!("product {:?} mapped twice", r["product"])),
            _ => Ok(()),
        }
    })?;
    Ok((out, counts))
}

/// Price index rows `country, year, factor`.
pub fn read_deflator(
    path: &Path,
    reg: &Registry,
    rejects: &mut Vec<RowReject>,
) -> Result<(Deflator, ReadCounts)> {
    let mut out = Deflator::default();
    let mut counts = ReadCounts::default();
    read_named(
        path,
        &["country", "year", "factor"],
        rejects,
        &mut counts,
        |r| {
            let f = number("factor", r["factor"])?;
            if f <= 0.0 {
                return Err(format!("nonpositive deflator {f}"));
            }
            out.insert(country(reg, r["country"])?, year(r["year"])?, f);
            Ok(())
        },
    )?;
    Ok((out, counts))
}

/// Header of the canonical flow and fluctuation tables.
pub const SERIES_HEADER: [&str; 6] = [
    "country",
    "industry",
    "input_industry",
    "year",
    "value",
    "valid",
];

pub fn flow_rows<'a>(
    reg: &'a Registry,
    s: &'a FlowSeries,
) -> impl Iterator<Item = Vec<String>> + 'a {
    let input = s.input_industry.map_or("", |i| reg.industry_code(i));
    s.years().enumerate().map(move |(t, y)| {
        vec![
            reg.country_code(s.country).to_string(),
            reg.industry_code(s.industry).to_string(),
            input.to_string(),
            y.to_string(),
            fmt_f64(s.values[t]),
            s.recorded[t].to_string(),
        ]
    })
}

pub fn fluctuation_rows<'a>(
    reg: &'a Registry,
    s: &'a FluctuationSeries,
) -> impl Iterator<Item = Vec<String>> + 'a {
    let input = s.input_industry.map_or("", |i| reg.industry_code(i));
    (0..s.values.len()).map(move |t| {
        let valid = s.valid[t];
        vec![
            reg.country_code(s.country).to_string(),
            reg.industry_code(s.industry).to_string(),
            input.to_string(),
            (s.start_year + t as Year).to_string(),
            if valid {
                fmt_f64(s.values[t])
            } else {
                String::new()
            },
            valid.to_string(),
        ]
    })
}

struct SeriesRow {
    key: SeriesKey,
    year: Year,
    value: Option<f64>,
    valid: bool,
}

fn read_series_rows(path: &Path, reg: &Registry) -> Result<Vec<SeriesRow>> {
    let mut rdr = reader(path, Delimiter::Comma, true)?;
    let mut out = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let ctx = || format!("{} row {}", path.display(), n + 2);
        if rec.len() != SERIES_HEADER.len() {
            bail!("{}: expected {} fields", ctx(), SERIES_HEADER.len());
        }
        let input = match &rec[2] {
            "" => None,
            code => Some(industry(reg, code).map_err(|e| anyhow!("{}: {e}", ctx()))?),
        };
        out.push(SeriesRow {
            key: SeriesKey {
                country: country(reg, &rec[0]).map_err(|e| anyhow!("{}: {e}", ctx()))?,
                industry: industry(reg, &rec[1]).map_err(|e| anyhow!("{}: {e}", ctx()))?,
                input,
            },
            year: rec[3].parse().with_context(ctx)?,
            value: parse_opt(&rec[4]).with_context(ctx)?,
            valid: rec[5].parse().with_context(ctx)?,
        });
    }
    Ok(out)
}

fn group_series(rows: Vec<SeriesRow>, path: &Path) -> Result<BTreeMap<SeriesKey, Vec<SeriesRow>>> {
    let mut out: BTreeMap<SeriesKey, Vec<SeriesRow>> = BTreeMap::new();
    for r in rows {
        let v = out.entry(r.key).or_default();
        if let Some(last) = v.last() {
            if r.year != last.year + 1 {
                bail!(
                    "{}: years of {:?} are not contiguous",
                    path.display(),
                    r.key
                );
            }
        }
        v.push(r);
    }
    Ok(out)
}

/// Reads a flow table written by the ingest stage.
pub fn read_flows(path: &Path, reg: &Registry) -> Result<BTreeMap<SeriesKey, FlowSeries>> {
    let grouped = group_series(read_series_rows(path, reg)?, path)?;
    grouped
        .into_iter()
        .map(|(k, rows)| {
            let values = rows
                .iter()
                .map(|r| {
                    r.value
                        .ok_or_else(|| anyhow!("{}: empty flow value", path.display()))
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((
                k,
                FlowSeries {
                    country: k.country,
                    industry: k.industry,
                    input_industry: k.input,
                    start_year: rows[0].year,
                    values,
                    recorded: rows.iter().map(|r| r.valid).collect(),
                },
            ))
        })
        .collect()
}

/// Reads a fluctuation table written by the ingest stage.
pub fn read_fluctuations(path: &Path, reg: &Registry) -> Result<FluctuationSet> {
    let grouped = group_series(read_series_rows(path, reg)?, path)?;
    Ok(grouped
        .into_iter()
        .map(|(k, rows)| {
            (
                k,
                FluctuationSeries {
                    country: k.country,
                    industry: k.industry,
                    input_industry: k.input,
                    start_year: rows[0].year,
                    values: rows.iter().map(|r| r.value.unwrap_or(f64::NAN)).collect(),
                    valid: rows.iter().map(|r| r.valid && r.value.is_some()).collect(),
                },
            )
        })
        .collect())
}

/// Reads a stage-written table into header-keyed string rows.
pub fn read_table(path: &Path) -> Result<Vec<BTreeMap<String, String>>> {
    let mut rdr = reader(path, Delimiter::Comma, true)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.with_context(|| format!("reading {}", path.display()))?;
        out.push(
            headers
                .iter()
                .cloned()
                .zip(rec.iter().map(str::to_string))
                .collect(),
        );
    }
    Ok(out)
}

pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn write_rejects(path: &Path, rejects: &[RowReject]) -> Result<()> {
    write_csv(
        path,
        &["file", "line", "error"],
        rejects
            .iter()
            .map(|r| vec![r.file.clone(), r.line.to_string(), r.error.clone()]),
    )
}
