use std::collections::BTreeMap;

use proptest::prelude::*;
use synergy_core::iotensor::*;
use synergy_core::techclust::ClusterAssignment;

fn registry() -> Registry {
    Registry::new(
        ["CHN", "MEX", "USA"].iter().map(|s| s.to_string()),
        [
            ("AGR", Sector::Primary),
            ("MIN", Sector::Primary),
            ("TEX", Sector::Secondary),
        ]
        .iter()
        .map(|(c, s)| (c.to_string(), *s)),
        Period::new(2000, 2011).unwrap(),
    )
    .unwrap()
}

fn record(year: Year, sc: u16, si: u16, dc: u16, di: u16, value: f64) -> TransactionRecord {
    TransactionRecord {
        year,
        source_country: CountryId::new(sc),
        source_industry: IndustryId::new(si),
        dest_country: CountryId::new(dc),
        dest_industry: IndustryId::new(di),
        value,
    }
}

fn arb_records() -> impl Strategy<Value = Vec<TransactionRecord>> {
    prop::collection::vec(
        (
            2000..=2011i32,
            0..3u16,
            0..3u16,
            0..3u16,
            0..3u16,
            0.0..1e6f64,
        )
            .prop_map(|(y, sc, si, dc, di, v)| record(y, sc, si, dc, di, v)),
        0..60,
    )
}

proptest! {
    #[test]
    fn inflow_is_additive_over_row_partitions(records in arb_records(), split in any::<prop::sample::Index>()) {
        let period = registry().period();
        let cut = if records.is_empty() { 0 } else { split.index(records.len() + 1) };
        let whole = TransactionTable::from_records(period, records.clone());
        let left = TransactionTable::from_records(period, records[..cut].to_vec());
        let right = TransactionTable::from_records(period, records[cut..].to_vec());
        for c in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    let (ii, jj, cc) = (IndustryId::new(i), IndustryId::new(j), CountryId::new(c));
                    let w = whole.total_input_inflow(ii, jj, cc);
                    let a = left.total_input_inflow(ii, jj, cc);
                    let b = right.total_input_inflow(ii, jj, cc);
                    for k in 0..w.values.len() {
                        let sum = a.values[k] + b.values[k];
                        prop_assert!((w.values[k] - sum).abs() <= 1e-9 * (1.0 + sum.abs()));
                    }
                }
            }
        }
    }

    #[test]
    fn log_fluctuations_ignore_positive_scale(values in prop::collection::vec(prop_oneof![Just(0.0), 1e-3..1e9f64], 2..30), c in 1e-6..1e6f64) {
        let base = FlowSeries {
            country: CountryId::new(0),
            industry: IndustryId::new(0),
            input_industry: None,
            start_year: 2000,
            recorded: vec![true; values.len()],
            values: values.clone(),
        };
        let scaled = FlowSeries { values: values.iter().map(|v| v * c).collect(), ..base.clone() };
        let a = log_fluctuations(&base).unwrap();
        let b = log_fluctuations(&scaled).unwrap();
        prop_assert_eq!(&a.valid, &b.valid);
        for (x, y) in a.values.iter().zip(&b.values) {
            if x.is_nan() {
                prop_assert!(y.is_nan());
            } else {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}

/// Output of TEX and the AGR/MIN inputs for every country, with the given
/// growth per year and a hole in MIN for one country-year.
fn fluctuation_set(hole: Option<(u16, Year)>) -> FluctuationSet {
    let reg = registry();
    let mut set = FluctuationSet::new();
    for c in reg.countries() {
        for input in [None, Some(IndustryId::new(0)), Some(IndustryId::new(1))] {
            let values: Vec<f64> = (0..12)
                .map(|t| {
                    let year = 2000 + t;
                    if input == Some(IndustryId::new(1)) && hole == Some((c.index() as u16, year)) {
                        0.0
                    } else {
                        100.0 * (1.0 + 0.01 * (t as f64) + 0.001 * c.index() as f64).powi(t)
                    }
                })
                .collect();
            let s = FlowSeries {
                country: c,
                industry: IndustryId::new(2),
                input_industry: input,
                start_year: 2000,
                recorded: vec![true; 12],
                values,
            };
            let f = log_fluctuations(&s).unwrap();
            set.insert(f.key(), f);
        }
    }
    set
}

fn assignment(members: &[(u16, usize)]) -> ClusterAssignment {
    let labels: BTreeMap<CountryId, usize> = members
        .iter()
        .map(|&(c, l)| (CountryId::new(c), l))
        .collect();
    ClusterAssignment::from_labels(Some(IndustryId::new(2)), 2, labels).unwrap()
}

#[test]
fn two_countries_with_complete_years_pool_every_row() {
    let set = fluctuation_set(None);
    let a = assignment(&[(0, 0), (1, 1), (2, 0)]);
    let s = pool_cluster_samples(
        &set,
        &a,
        0,
        IndustryId::new(2),
        (IndustryId::new(0), IndustryId::new(1)),
        200,
    )
    .unwrap();
    // 12 years give 11 fluctuations per country
    assert_eq!(s.len(), 22);
    assert!(s.below_minimum);
    assert_eq!(s.provenance[0], (CountryId::new(0), 2001));
    assert_eq!(s.provenance[11], (CountryId::new(2), 2001));
    for (row, &(c, year)) in s.provenance.iter().enumerate() {
        let x1 = set[&SeriesKey {
            country: c,
            industry: IndustryId::new(2),
            input: Some(IndustryId::new(0)),
        }]
            .get(year);
        let x2 = set[&SeriesKey {
            country: c,
            industry: IndustryId::new(2),
            input: Some(IndustryId::new(1)),
        }]
            .get(year);
        let y = set[&SeriesKey {
            country: c,
            industry: IndustryId::new(2),
            input: None,
        }]
            .get(year);
        assert_eq!(
            (x1, x2, y),
            (Some(s.x1[row]), Some(s.x2[row]), Some(s.y[row]))
        );
    }
}

#[test]
fn invalid_input_year_drops_the_row_from_all_columns() {
    // a zero in 2005 invalidates the 2005 and 2006 fluctuations
    let set = fluctuation_set(Some((1, 2005)));
    let a = assignment(&[(0, 1), (1, 0), (2, 1)]);
    let s = pool_cluster_samples(
        &set,
        &a,
        0,
        IndustryId::new(2),
        (IndustryId::new(0), IndustryId::new(1)),
        5,
    )
    .unwrap();
    assert_eq!(s.len(), 9);
    assert_eq!((s.x1.len(), s.x2.len(), s.y.len()), (9, 9, 9));
    assert!(!s.provenance.iter().any(|&(_, y)| y == 2005 || y == 2006));
    assert!(!s.below_minimum);
}

#[test]
fn empty_cluster_gives_empty_flagged_sample() {
    let set = fluctuation_set(None);
    let a = assignment(&[(0, 0), (1, 0), (2, 0)]);
    let s = pool_cluster_samples(
        &set,
        &a,
        1,
        IndustryId::new(2),
        (IndustryId::new(0), IndustryId::new(1)),
        200,
    )
    .unwrap();
    assert!(s.is_empty() && s.below_minimum);
}

#[test]
fn self_input_series_is_a_regular_input() {
    let reg = registry();
    let table = TransactionTable::from_records(reg.period(), [record(2003, 1, 2, 1, 2, 7.0)]);
    let s = table.total_input_inflow(IndustryId::new(2), IndustryId::new(2), CountryId::new(1));
    assert_eq!(s.value_at(2003), Some(7.0));
    assert!(reg
        .input_pairs()
        .contains(&(IndustryId::new(0), IndustryId::new(2))));
}
