use std::fs;
use std::path::Path;

use proptest::prelude::*;
use synergy_core::iotensor::{Period, Registry, Sector};
use synergy_pipeline::config::{ColumnRef, Delimiter, FinalDemandSchema, TransactionSchema};
use synergy_pipeline::formats::{
    fmt_f64, parse_opt, read_final_demand, read_product_mapping, read_registry, read_trade,
    read_transactions, write_csv,
};

fn registry() -> Registry {
    Registry::new(
        ["USA", "MEX"].map(String::from),
        [("AGR", Sector::Primary), ("TEX", Sector::Secondary)].map(|(c, s)| (c.to_string(), s)),
        Period::new(2000, 2002).unwrap(),
    )
    .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const HEADER: &str = "year,source_country,source_industry,dest_country,dest_industry,value\n";

#[test]
fn example_row_maps_to_one_record() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "t.csv",
        &format!("{HEADER}2000,USA,AGR,MEX,TEX,1500.0\n"),
    );
    let reg = registry();
    let mut rejects = Vec::new();
    let mut got = Vec::new();
    let counts = read_transactions(
        &p,
        &TransactionSchema::default(),
        Delimiter::Auto,
        true,
        &reg,
        &mut rejects,
        |r| got.push(r),
    )
    .unwrap();
    assert_eq!((counts.rows, counts.rejected), (1, 0));
    assert!(rejects.is_empty());
    let r = &got[0];
    assert_eq!(r.year, 2000);
    assert_eq!(reg.country_code(r.source_country), "USA");
    assert_eq!(reg.industry_code(r.source_industry), "AGR");
    assert_eq!(reg.country_code(r.dest_country), "MEX");
    assert_eq!(reg.industry_code(r.dest_industry), "TEX");
    assert_eq!(r.value, 1500.0);
}

#[test]
fn bad_rows_are_rejected_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{HEADER}2000,USA,AGR,MEX,TEX,1.0\n2000,USA,AGR,MEX,TEX,-5\n2001,CAN,AGR,MEX,TEX,2\n2001,USA,AGR,MEX,TEX,abc\n2002,USA,TEX,USA,AGR,3\n"
    );
    let p = write(dir.path(), "t.csv", &text);
    let mut rejects = Vec::new();
    let mut n = 0;
    let counts = read_transactions(
        &p,
        &TransactionSchema::default(),
        Delimiter::Auto,
        true,
        &registry(),
        &mut rejects,
        |_| n += 1,
    )
    .unwrap();
    assert_eq!((counts.rows, counts.rejected, n), (5, 3, 2));
    let lines: Vec<u64> = rejects.iter().map(|r| r.line).collect();
    assert_eq!(lines, vec![3, 4, 5]);
    assert!(rejects.iter().all(|r| r.file == "t.csv"));
    assert!(rejects[1].error.contains("CAN"), "{}", rejects[1].error);
}

#[test]
fn empty_stream_yields_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "t.csv", "");
    let mut rejects = Vec::new();
    let counts = read_transactions(
        &p,
        &TransactionSchema::default(),
        Delimiter::Auto,
        true,
        &registry(),
        &mut rejects,
        |_| panic!("no records expected"),
    )
    .unwrap();
    assert_eq!((counts.rows, counts.rejected), (0, 0));
    let header_only = write(dir.path(), "h.csv", HEADER);
    let counts = read_transactions(
        &header_only,
        &TransactionSchema::default(),
        Delimiter::Auto,
        true,
        &registry(),
        &mut rejects,
        |_| panic!("no records expected"),
    )
    .unwrap();
    assert_eq!(counts.rows, 0);
}

#[test]
fn tab_files_and_positional_columns() {
    let dir = tempfile::tempdir().unwrap();
    // value first, no header
    let p = write(dir.path(), "t.tsv", "7.5\t2001\tMEX\tTEX\tUSA\tAGR\n");
    let schema = TransactionSchema {
        value: ColumnRef::Index(0),
        year: ColumnRef::Index(1),
        source_country: ColumnRef::Index(2),
        source_industry: ColumnRef::Index(3),
        dest_country: ColumnRef::Index(4),
        dest_industry: ColumnRef::Index(5),
    };
    let mut got = Vec::new();
    read_transactions(
        &p,
        &schema,
        Delimiter::Auto,
        false,
        &registry(),
        &mut Vec::new(),
        |r| got.push(r),
    )
    .unwrap();
    assert_eq!(got.len(), 1);
    assert_eq!((got[0].year, got[0].value), (2001, 7.5));

    let named = write(dir.path(), "n.csv", "2001,MEX,TEX,USA,AGR,7.5\n");
    let err = read_transactions(
        &named,
        &TransactionSchema::default(),
        Delimiter::Comma,
        false,
        &registry(),
        &mut Vec::new(),
        |_| {},
    )
    .unwrap_err();
    assert!(err.to_string().contains("no header row"), "{err}");
}

#[test]
fn final_demand_and_missing_column() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "fd.csv",
        "year,source_country,source_industry,demand_country,value\n2000,USA,AGR,MEX,10\n",
    );
    let mut n = 0;
    read_final_demand(
        &p,
        &FinalDemandSchema::default(),
        Delimiter::Auto,
        true,
        &registry(),
        &mut Vec::new(),
        |_| n += 1,
    )
    .unwrap();
    assert_eq!(n, 1);
    let bad = write(dir.path(), "bad.csv", "year,country,value\n2000,USA,1\n");
    assert!(read_final_demand(
        &bad,
        &FinalDemandSchema::default(),
        Delimiter::Auto,
        true,
        &registry(),
        &mut Vec::new(),
        |_| {}
    )
    .is_err());
}

#[test]
fn registry_reads_sectors_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(dir.path(), "c.csv", "code\nUSA\nMEX\n");
    let i = write(dir.path(), "i.csv", "code,sector\nTEX,secondary\nAGR,\n");
    let m = write(dir.path(), "m.csv", "industry,sector\nAGR,Primary\n");
    let period = Period::new(2000, 2001).unwrap();
    let reg = read_registry(&c, &i, Some(&m), period).unwrap();
    let agr = reg.industry_id("AGR").unwrap();
    assert_eq!(reg.sector(agr), Sector::Primary);
    let plain = read_registry(&c, &i, None, period).unwrap();
    assert_eq!(
        plain.sector(plain.industry_id("AGR").unwrap()),
        Sector::Other
    );
    let bad = write(dir.path(), "b.csv", "code,sector\nTEX,quaternary\n");
    let err = read_registry(&c, &bad, None, period).unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
}

#[test]
fn trade_keeps_line_numbers_and_mapping_rejects_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let reg = registry();
    let t = write(
        dir.path(),
        "trade.csv",
        "year,exporter,product,value\n2000,USA,p1,5\n2000,XXX,p1,5\n2001,MEX,p2,1\n",
    );
    let mut rejects = Vec::new();
    let (records, lines, counts) = read_trade(&t, &reg, &mut rejects).unwrap();
    assert_eq!(records.len(), 2);
    assert_eq!(lines, vec![2, 4]);
    assert_eq!((counts.rows, counts.rejected), (3, 1));
    let m = write(
        dir.path(),
        "map.csv",
        "product,industry\np1,AGR\np1,TEX\np2,TEX\n",
    );
    let mut rejects = Vec::new();
    let (map, _) = read_product_mapping(&m, &reg, &mut rejects).unwrap();
    assert_eq!(map.len(), 2);
    assert_eq!(rejects.len(), 1);
}

#[test]
fn csv_writer_uses_unix_newlines() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("o.csv");
    write_csv(
        &p,
        &["a", "b"],
        vec![vec!["1".to_string(), "x,y".to_string()]],
    )
    .unwrap();
    assert_eq!(fs::read_to_string(&p).unwrap(), "a,b\n1,\"x,y\"\n");
}

#[test]
fn missing_values_are_empty() {
    assert_eq!(fmt_f64(f64::NAN), "");
    assert_eq!(parse_opt("").unwrap(), None);
    assert!(parse_opt("nope").is_err());
}

proptest! {
    #[test]
    fn floats_round_trip(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
        prop_assert_eq!(parse_opt(&fmt_f64(v)).unwrap(), Some(v));
    }
}
