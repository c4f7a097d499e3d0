use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};
use synergy_core::seed;
use synergy_core::stats::Stars;
use synergy_core::valid::*;

fn table(x: &[f64], y: &[f64], g: &[&str]) -> DataTable {
    DataTable::default()
        .with_numeric("x", x.to_vec())
        .with_numeric("y", y.to_vec())
        .with_labels("g", g.iter().map(|s| s.to_string()).collect())
}

fn spec(regressors: &[&str]) -> RegressionSpec {
    RegressionSpec {
        dependent: "y".into(),
        regressors: regressors.iter().map(|s| s.to_string()).collect(),
        cluster_column: "g".into(),
        intercept: true,
    }
}

const X: [f64; 6] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
const Y: [f64; 6] = [1.1, 2.3, 2.9, 4.2, 4.8, 6.5];

/// Sandwich for one regressor plus intercept written out with 2x2 algebra.
fn hand_sandwich(x: &[f64], y: &[f64], g: &[usize], groups: usize) -> ([f64; 2], [f64; 2]) {
    let n = x.len() as f64;
    let (sx, sxx) = (x.iter().sum::<f64>(), x.iter().map(|v| v * v).sum::<f64>());
    let (sy, sxy) = (
        y.iter().sum::<f64>(),
        x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>(),
    );
    let det = n * sxx - sx * sx;
    // (X'X)^-1 for columns [1, x]
    let inv = [[sxx / det, -sx / det], [-sx / det, n / det]];
    let b0 = inv[0][0] * sy + inv[0][1] * sxy;
    let b1 = inv[1][0] * sy + inv[1][1] * sxy;
    let mut s = vec![[0.0; 2]; groups];
    for i in 0..x.len() {
        let u = y[i] - b0 - b1 * x[i];
        s[g[i]][0] += u;
        s[g[i]][1] += x[i] * u;
    }
    let mut meat = [[0.0; 2]; 2];
    for v in &s {
        for a in 0..2 {
            for b in 0..2 {
                meat[a][b] += v[a] * v[b];
            }
        }
    }
    let gf = groups as f64;
    let c = gf / (gf - 1.0) * (n - 1.0) / (n - 2.0);
    let mut se = [0.0; 2];
    for (j, slot) in se.iter_mut().enumerate() {
        let mut v = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                v += inv[j][a] * meat[a][b] * inv[b][j];
            }
        }
        *slot = (c * v).sqrt();
    }
    ([b0, b1], se)
}

#[test]
fn six_point_fixture_matches_hand_sandwich_and_statsmodels() {
    let r = ols_cluster(
        &table(&X, &Y, &["a", "a", "b", "b", "c", "c"]),
        &spec(&["x"]),
    )
    .unwrap();
    let (beta, se) = hand_sandwich(&X, &Y, &[0, 0, 1, 1, 2, 2], 3);
    let (b1, se1, _) = r.get("x").unwrap();
    let (b0, se0, _) = r.get(INTERCEPT).unwrap();
    assert!((b1 - beta[1]).abs() < 1e-10 && (b0 - beta[0]).abs() < 1e-10);
    assert!((se1 - se[1]).abs() < 1e-10 && (se0 - se[0]).abs() < 1e-10);
    // statsmodels OLS(...).fit(cov_type="cluster")
    assert!((b1 - 1.022_857_142_857_144).abs() < 1e-10);
    assert!((se1 - 0.034_900_027_786_087).abs() < 1e-10);
    assert!((se0 - 0.183_894_502_932_027).abs() < 1e-10);
    assert!((r.adj_r2 - 0.978_251_980_577_562).abs() < 1e-10);
    assert_eq!((r.observations, r.clusters), (6, 3));
}

#[test]
fn singleton_clusters_give_hc1() {
    let r = ols_cluster(
        &table(&X, &Y, &["1", "2", "3", "4", "5", "6"]),
        &spec(&["x"]),
    )
    .unwrap();
    // statsmodels cov_type="HC1"
    assert!((r.get("x").unwrap().1 - 0.070_345_972_731_171).abs() < 1e-10);
    assert!((r.get(INTERCEPT).unwrap().1 - 0.195_993_521_110_929).abs() < 1e-10);
}

#[test]
fn independent_noise_is_rarely_significant() {
    let mut quiet = 0;
    for s in 0..100u64 {
        let mut rng = seed::rng(s);
        let n = 10_000;
        let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let g: Vec<String> = (0..n).map(|i| (i % 50).to_string()).collect();
        let data = DataTable::default()
            .with_numeric("x", x)
            .with_numeric("y", y)
            .with_labels("g", g);
        let (b, _, stars) = ols_cluster(&data, &spec(&["x"])).unwrap().get("x").unwrap();
        assert!(b.abs() < 0.05);
        quiet += usize::from(stars == Stars::None);
    }
    // under the null a 10% test stars 10 of 100 on average, so the count is
    // Binomial(100, 0.9); 80 is its 0.1% quantile
    assert!(quiet >= 80, "{quiet} of 100");
}

#[test]
fn regression_errors() {
    let g = ["a", "a", "b", "b", "c", "c"];
    let data = table(&X, &Y, &g).with_numeric("x2", X.iter().map(|v| 3.0 * v).collect());
    assert_eq!(
        ols_cluster(&data, &spec(&["x", "x2"])),
        Err(ValidError::RankDeficient("x2".into()))
    );
    let one = table(&X, &Y, &["a"; 6]);
    assert_eq!(
        ols_cluster(&one, &spec(&["x"])),
        Err(ValidError::SingleCluster)
    );
    assert_eq!(
        ols_cluster(&data, &spec(&["z"])),
        Err(ValidError::MissingColumn("z".into()))
    );
}

#[test]
fn stars_follow_strict_thresholds() {
    assert_eq!(Stars::from_p_value(0.10), Stars::None);
    assert_eq!(Stars::from_p_value(0.0999), Stars::One);
    assert_eq!(Stars::from_p_value(0.05), Stars::One);
    assert_eq!(Stars::from_p_value(0.01), Stars::Two);
    assert_eq!(Stars::from_p_value(0.0099), Stars::Three);
}

#[test]
fn binned_means_follow_the_generating_line() {
    let mut rng = seed::rng(8);
    let n = 6000;
    let sigma = 0.5;
    let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|v| {
            1.0 + 2.0 * v
                + sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        })
        .collect();
    let b = binned_scatter(&x, &y, 20).unwrap();
    assert_eq!(b.bins.iter().map(|b| b.count).sum::<usize>(), n);
    let bound = 3.0 * sigma / ((n / 20) as f64).sqrt();
    for bin in &b.bins {
        assert!((bin.mean_y - (1.0 + 2.0 * bin.mean_x)).abs() < bound);
        assert!(bin.lower <= bin.upper);
    }
    assert!(b.bins.windows(2).all(|w| w[0].upper <= w[1].lower));
    assert!((b.slope - 2.0).abs() < 0.05);

    let flat = binned_scatter(&x[..100], &[4.0; 100], 5).unwrap();
    assert!(flat.bins.iter().all(|b| b.mean_y == 4.0));
    assert!(flat.slope.abs() < 1e-12);
}

fn arb_data() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<usize>)> {
    (12usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(-5.0..5.0f64, n),
            prop::collection::vec(-5.0..5.0f64, n),
            prop::collection::vec(-5.0..5.0f64, n),
            prop::collection::vec(0usize..4, n),
        )
    })
}

fn data(x: &[f64], z: &[f64], y: &[f64], g: &[usize], names: &[&str]) -> DataTable {
    DataTable::default()
        .with_numeric("x", x.to_vec())
        .with_numeric("z", z.to_vec())
        .with_numeric("y", y.to_vec())
        .with_labels("g", g.iter().map(|&v| names[v].to_string()).collect())
}

proptest! {
    #[test]
    fn order_and_labels_do_not_matter((x, z, y, g) in arb_data(), shift in 1usize..11) {
        prop_assume!(g.iter().any(|&v| v != g[0]));
        let s = spec(&["x", "z"]);
        let a = ols_cluster(&data(&x, &z, &y, &g, &["p", "q", "r", "s"]), &s).unwrap();
        let n = x.len();
        let rot = |v: &[f64]| (0..n).map(|i| v[(i + shift) % n]).collect::<Vec<f64>>();
        let gr: Vec<usize> = (0..n).map(|i| g[(i + shift) % n]).collect();
        let b = ols_cluster(&data(&rot(&x), &rot(&z), &rot(&y), &gr, &["w", "b", "k", "a"]), &s).unwrap();
        for i in 0..3 {
            prop_assert!((a.coefficients[i] - b.coefficients[i]).abs() < 1e-9);
            prop_assert!((a.std_errors[i] - b.std_errors[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn extra_regressor_never_raises_rss((x, z, y, g) in arb_data()) {
        prop_assume!(g.iter().any(|&v| v != g[0]));
        let d = data(&x, &z, &y, &g, &["p", "q", "r", "s"]);
        let small = ols_cluster(&d, &spec(&["x"])).unwrap();
        let big = ols_cluster(&d, &spec(&["x", "z"])).unwrap();
        prop_assert!(big.rss <= small.rss + 1e-9);
    }
}
