use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use synergy_core::linalg::Matrix;
use synergy_core::seed;
use synergy_core::techclust::kmeans::*;
use synergy_core::techclust::KMeansParams;

fn gaussian_blobs(sizes: &[(usize, f64, f64)], sd: f64, s: u64) -> Matrix {
    let mut rng = seed::rng(s);
    let mut data = Vec::new();
    for &(n, cx, cy) in sizes {
        for _ in 0..n {
            let dx: f64 = StandardNormal.sample(&mut rng);
            let dy: f64 = StandardNormal.sample(&mut rng);
            data.push(cx + sd * dx);
            data.push(cy + sd * dy);
        }
    }
    Matrix::from_rows(data.len() / 2, 2, data)
}

fn partition_wcss(points: &Matrix, labels: &[usize], k: usize) -> f64 {
    let centers = centroids(points, labels, &Matrix::zeros(k, points.cols()));
    wcss(points, labels, &centers)
}

#[test]
fn balanced_split_of_unequal_blobs_matches_exhaustive_search() {
    let pts = gaussian_blobs(&[(14, 0.0, 0.0), (6, 8.0, 0.0)], 1.0, 2024);
    let n = pts.rows();
    // every 10/10 split, point 0 fixed in the first half
    let mut best = (f64::INFINITY, 0u32);
    for mask in 0u32..(1 << n) {
        if mask & 1 == 0 || mask.count_ones() != 10 {
            continue;
        }
        let labels: Vec<usize> = (0..n).map(|i| usize::from(mask >> i & 1 == 0)).collect();
        let w = partition_wcss(&pts, &labels, 2);
        if w < best.0 {
            best = (w, mask);
        }
    }
    let params = KMeansParams {
        k: 2,
        min_size: 10,
        max_size: 10,
        seed: 1,
        restarts: 25,
        max_iter: 100,
    };
    let out = constrained_kmeans_points(&pts, &params).unwrap();
    let expected: Vec<usize> = (0..n).map(|i| usize::from(best.1 >> i & 1 == 0)).collect();
    assert_eq!(out.labels, expected);
    assert!((out.objective - best.0).abs() < 1e-9 * best.0);
    // four points of the larger blob had to move
    assert_eq!(out.labels[..14].iter().filter(|&&l| l == 1).count(), 4);
}

#[test]
fn loose_bounds_reproduce_plain_lloyd() {
    let pts = gaussian_blobs(&[(9, 0.0, 0.0), (7, 3.0, 1.0), (8, -1.0, 4.0)], 1.2, 77);
    let n = pts.rows();
    for s in 0..10u64 {
        let init = kmeans_plus_plus(&pts, 3, &mut seed::rng(s));
        // textbook Lloyd: nearest center, centroid update, stop on a repeat
        let mut centers = init.clone();
        let mut labels: Vec<usize> = Vec::new();
        for _ in 0..100 {
            let next: Vec<usize> = (0..n)
                .map(|i| {
                    (0..3)
                        .map(|h| {
                            let d: f64 = (0..2)
                                .map(|j| (pts[(i, j)] - centers[(h, j)]).powi(2))
                                .sum();
                            (d, h)
                        })
                        .min_by(|a, b| a.0.total_cmp(&b.0))
                        .unwrap()
                        .1
                })
                .collect();
            if next == labels {
                break;
            }
            centers = centroids(&pts, &next, &centers);
            labels = next;
        }
        let out = lloyd_from(&pts, init, 0, n, 100);
        assert_eq!(out.labels, labels);
        assert!(out.converged);
    }
}

fn arb_points() -> impl Strategy<Value = Matrix> {
    (6usize..24, 1usize..4).prop_flat_map(|(n, d)| {
        prop::collection::vec(-10.0..10.0f64, n * d).prop_map(move |v| Matrix::from_rows(n, d, v))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn size_bounds_hold_and_objective_never_rises(pts in arb_points(), k in 2usize..4, s in any::<u64>()) {
        let n = pts.rows();
        let mut params = KMeansParams::balanced(n, k, s);
        params.restarts = 4;
        let out = constrained_kmeans_points(&pts, &params).unwrap();
        let mut sizes = vec![0; k];
        for &l in &out.labels {
            sizes[l] += 1;
        }
        prop_assert!(sizes.iter().all(|&z| z >= params.min_size && z <= params.max_size));
        prop_assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!((partition_wcss(&pts, &out.labels, k) - out.objective).abs() <= 1e-9 * (1.0 + out.objective));
        prop_assert_eq!(out, constrained_kmeans_points(&pts, &params).unwrap());
    }

    #[test]
    fn row_order_does_not_change_separated_partitions(s in any::<u64>()) {
        let pts = gaussian_blobs(&[(5, 0.0, 0.0), (5, 20.0, 0.0), (5, 0.0, 20.0)], 0.5, s);
        let n = pts.rows();
        let mut rng = seed::rng(s ^ 1);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let shuffled = Matrix::from_fn(n, 2, |i, j| pts[(perm[i], j)]);
        let params = KMeansParams { k: 3, min_size: 4, max_size: 6, seed: 5, restarts: 10, max_iter: 100 };
        let a = constrained_kmeans_points(&pts, &params).unwrap().labels;
        let b = constrained_kmeans_points(&shuffled, &params).unwrap().labels;
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(a[perm[i]] == a[perm[j]], b[i] == b[j]);
            }
        }
    }
}
