use std::collections::BTreeMap;

use proptest::prelude::*;
use synergy_core::ecx::*;
use synergy_core::iotensor::{CountryId, IndustryId, Period};
use synergy_core::linalg::Matrix;

fn binary(rows: usize, cols: usize, v: &[u8]) -> Matrix {
    Matrix::from_rows(rows, cols, v.iter().map(|&b| f64::from(b)).collect())
}

fn countries(n: u16) -> Vec<CountryId> {
    (0..n).map(CountryId::new).collect()
}

fn industries(n: u16) -> Vec<IndustryId> {
    (0..n).map(IndustryId::new).collect()
}

#[test]
fn aggregation_sums_products_and_reports_unmapped() {
    let mapping: BTreeMap<String, IndustryId> = [("0101", 0), ("0102", 0), ("2601", 1)]
        .iter()
        .map(|(p, i)| (p.to_string(), IndustryId::new(*i)))
        .collect();
    let rec = |year, c, p: &str, value| TradeRecord {
        year,
        exporter: CountryId::new(c),
        product: p.into(),
        value,
    };
    let records = [
        rec(2001, 0, "0101", 3.0),
        rec(2001, 0, "0102", 4.0),
        rec(2001, 1, "9999", 1.0),
        rec(2001, 1, "2601", 2.0),
    ];
    let (by_year, rejected) = aggregate_exports(
        &records,
        &mapping,
        &countries(2),
        &industries(2),
        Period::new(2000, 2001).unwrap(),
    );
    assert_eq!(by_year[&2001].values[(0, 0)], 7.0);
    assert_eq!(by_year[&2001].values[(1, 1)], 2.0);
    assert!(by_year[&2000].values.as_slice().iter().all(|&v| v == 0.0));
    assert_eq!(rejected.len(), 1);
    assert_eq!(
        (rejected[0].index, rejected[0].product.as_str()),
        (2, "9999")
    );
    assert_eq!(
        rca_binarize(&by_year[&2000], 1.0),
        Err(ComplexityError::NoExports)
    );
}

#[test]
fn single_cell_has_unit_rca() {
    let e = ExportMatrix {
        year: 2000,
        countries: countries(1),
        industries: industries(1),
        values: Matrix::from_rows(1, 1, vec![5.0]),
    };
    let r = rca_binarize(&e, DEFAULT_RCA_THRESHOLD).unwrap();
    assert_eq!((r.rca[(0, 0)], r.m[(0, 0)]), (1.0, 1.0));
    let fc = fitness_complexity(&r.m, 100, 1e-12).unwrap();
    assert_eq!((fc.fitness[0], fc.complexity[0]), (1.0, 1.0));
    assert!(fc.converged);
}

#[test]
fn fitness_fixed_point_matches_reference_iteration() {
    // numpy iteration of the same map to 1e-9, 95 steps
    let m = binary(3, 4, &[1, 1, 1, 1, 1, 1, 0, 0, 1, 0, 1, 0]);
    let fc = fitness_complexity(&m, DEFAULT_FITNESS_MAX_ITER, DEFAULT_FITNESS_TOL).unwrap();
    assert!(fc.converged);
    assert_eq!(fc.iterations, 95);
    let f = [
        2.302_775_635_290_876,
        0.348_612_182_354_562,
        0.348_612_182_354_562,
    ];
    let q = [
        0.211_102_551_767_231,
        0.394_448_725_969_048,
        0.394_448_725_969_048,
        2.999_999_996_294_673,
    ];
    assert!(fc.fitness.iter().zip(f).all(|(a, b)| (a - b).abs() < 1e-12));
    assert!(fc
        .complexity
        .iter()
        .zip(q)
        .all(|(a, b)| (a - b).abs() < 1e-12));
    // ten times the budget moves the iterate by less than the tolerance scale
    let long = fitness_complexity(&m, 950, 0.0).unwrap();
    assert!(long
        .fitness
        .iter()
        .zip(&fc.fitness)
        .all(|(a, b)| (a - b).abs() < 1e-7));
    // fitness of the top country tends to (1 + sqrt 13) / 2
    assert!((long.fitness[0] - (1.0 + 13f64.sqrt()) / 2.0).abs() < 1e-9);

    let id = fitness_complexity(&Matrix::identity(2), 100, 1e-12).unwrap();
    assert_eq!(
        (id.fitness, id.complexity),
        (vec![1.0, 1.0], vec![1.0, 1.0])
    );

    let nested = fitness_complexity(&binary(2, 2, &[1, 1, 1, 0]), 100_000, 1e-12).unwrap();
    assert!(nested.fitness[0] > nested.fitness[1] && nested.complexity[1] > nested.complexity[0]);
    assert!(!nested.converged);
}

#[test]
fn fitness_stays_finite_on_strongly_nested_matrix() {
    // country c exports the c + 1 most ubiquitous industries
    let (nc, np) = (40, 8);
    let cells: Vec<u8> = (0..nc)
        .flat_map(|c| (0..np).map(move |p| u8::from(p <= c % np)))
        .collect();
    let fc = fitness_complexity(&binary(nc, np, &cells), 100_000, 1e-9).unwrap();
    assert!(fc
        .fitness
        .iter()
        .chain(&fc.complexity)
        .all(|x| x.is_finite()));
    assert!(fc.complexity.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn eci_matches_reference_eigenvector() {
    let m = binary(
        5,
        5,
        &[
            1, 1, 1, 0, 0, 1, 1, 0, 1, 0, 1, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 0, 0, 0,
        ],
    );
    let z = eci_pci(&m).unwrap();
    let reference = [
        -1.593_020_239_054_160_8,
        -0.478_252_587_301_927_27,
        0.324_477_116_173_885_5,
        0.324_477_116_173_885_5,
        1.422_318_594_008_316_7,
    ];
    assert!(z.iter().zip(reference).all(|(a, b)| (a - b).abs() < 1e-10));
    let z = eci_pci(&binary(2, 2, &[1, 1, 1, 0])).unwrap();
    assert_eq!(
        z.iter().map(|v| v.round()).collect::<Vec<_>>(),
        vec![-1.0, 1.0]
    );
}

#[test]
fn intertemporal_average_uses_the_industry_intersection() {
    let scores = |year, q: &[(u16, f64)]| ComplexityScores {
        year: Some(year),
        fitness: BTreeMap::from([(CountryId::new(0), 1.0)]),
        q: q.iter().map(|&(i, v)| (IndustryId::new(i), v)).collect(),
        eci: BTreeMap::new(),
        iterations: 1,
        residual: 0.0,
        converged: true,
        eci_error: Some(ComplexityError::DegenerateStructure),
    };
    let avg = intertemporal_average(&[
        scores(2000, &[(0, 1.0), (1, 5.0)]),
        scores(2001, &[(0, 3.0)]),
    ])
    .unwrap();
    assert_eq!(avg.scores.q, BTreeMap::from([(IndustryId::new(0), 2.0)]));
    assert_eq!(avg.excluded_industries, vec![IndustryId::new(1)]);
    assert_eq!(avg.scores.year, None);
    let same =
        intertemporal_average(&[scores(2000, &[(0, 1.5)]), scores(2001, &[(0, 1.5)])]).unwrap();
    assert_eq!(same.scores.q[&IndustryId::new(0)], 1.5);
    assert_eq!(
        intertemporal_average(&[scores(2000, &[(0, 1.0)]), scores(2001, &[(1, 1.0)])]),
        Err(ComplexityError::EmptyIntersection)
    );
    assert_eq!(intertemporal_average(&[]), Err(ComplexityError::NoYears));
}

#[test]
fn diversifying_never_lowers_fitness() {
    let bases: [[u8; 4]; 4] = [[1, 1, 1, 0], [1, 0, 0, 1], [1, 1, 1, 1], [1, 1, 0, 1]];
    for base in bases {
        for c in 0..2 {
            let before = fitness_complexity(&binary(2, 2, &base), 100_000, 1e-12)
                .unwrap()
                .fitness[c];
            let wider = binary(
                2,
                3,
                &[
                    base[0],
                    base[1],
                    u8::from(c == 0),
                    base[2],
                    base[3],
                    u8::from(c == 1),
                ],
            );
            let after = fitness_complexity(&wider, 100_000, 1e-12).unwrap().fitness[c];
            assert!(
                after >= before - 1e-9,
                "base {base:?}, country {c}: {before} -> {after}"
            );
        }
    }
}

fn arb_binary() -> impl Strategy<Value = Matrix> {
    (2usize..6, 2usize..6).prop_flat_map(|(r, c)| {
        prop::collection::vec(any::<bool>(), r * c).prop_map(move |v| {
            let mut m =
                Matrix::from_rows(r, c, v.iter().map(|&b| f64::from(u8::from(b))).collect());
            // guarantee nonzero margins
            for i in 0..r.max(c) {
                m[(i % r, i % c)] = 1.0;
            }
            m
        })
    })
}

proptest! {
    #[test]
    fn fitness_commutes_with_permutations(m in arb_binary(), rs in any::<u64>(), cs in any::<u64>()) {
        let (r, c) = (m.rows(), m.cols());
        let rp: Vec<usize> = (0..r).map(|i| (i + rs as usize) % r).collect();
        let cp: Vec<usize> = (0..c).map(|j| (j + cs as usize) % c).rev().collect();
        let pm = m.select(&rp, &cp);
        let a = fitness_complexity(&m, 200, 0.0).unwrap();
        let b = fitness_complexity(&pm, 200, 0.0).unwrap();
        for i in 0..r {
            prop_assert!((b.fitness[i] - a.fitness[rp[i]]).abs() < 1e-9 * (1.0 + a.fitness[rp[i]]));
        }
        for j in 0..c {
            prop_assert!((b.complexity[j] - a.complexity[cp[j]]).abs() < 1e-9 * (1.0 + a.complexity[cp[j]]));
        }
    }

    #[test]
    fn rca_ignores_export_scale(v in prop::collection::vec(0.0..1e6f64, 12), k in 1e-4..1e4f64) {
        prop_assume!(v.iter().sum::<f64>() > 0.0);
        let e = ExportMatrix { year: 2000, countries: countries(3), industries: industries(4), values: Matrix::from_rows(3, 4, v) };
        let scaled = ExportMatrix { values: e.values.scale(k), ..e.clone() };
        let (a, b) = (rca_binarize(&e, 1.0).unwrap(), rca_binarize(&scaled, 1.0).unwrap());
        prop_assert_eq!(a.m, b.m);
        prop_assert_eq!(a.dropped_industries, b.dropped_industries);
    }

    #[test]
    fn eci_is_standardized(m in arb_binary()) {
        if let Ok(z) = eci_pci(&m) {
            let n = z.len() as f64;
            let mean = z.iter().sum::<f64>() / n;
            let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-10 && (var - 1.0).abs() < 1e-10);
        }
    }
}
