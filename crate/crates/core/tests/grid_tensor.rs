mod common;

use std::f64::consts::PI;

use proptest::prelude::*;
use rdt_lab::grid_tensor::*;

fn sin_x(grid: Grid) -> TensorField {
    let l = grid.side();
    TensorField::scalar_from_fn(grid, |p| (2.0 * PI * p[0] / l).sin())
}

#[test]
fn derivatives_converge_at_fourth_order() {
    for m in 1..=4 {
        let err = |n: usize| {
            let grid = Grid::with_side(2, n, 4.0).unwrap();
            let k = 2.0 * PI / grid.side();
            let d = partial_derivative(&sin_x(grid), 0, m).unwrap();
            // d^m/dx^m sin(kx) = k^m sin(kx + mπ/2)
            let exact =
                TensorField::scalar_from_fn(grid, |p| k.powi(m as i32) * (k * p[0] + m as f64 * PI / 2.0).sin());
            sup_norm(&d.sub(&exact).unwrap())
        };
        let ratio = err(32) / err(64);
        assert!((ratio - 16.0).abs() < 1.0, "order {m}: ratio {ratio}");
    }
}

#[test]
fn sup_norm_examples() {
    let grid = Grid::with_side(2, 32, 4.0).unwrap();
    assert_eq!(sup_norm(&TensorField::zeros(grid, Rank::SymCov2)), 0.0);
    let mut f = TensorField::zeros(grid, Rank::Vector);
    f.set(77, 1, 3.0);
    assert_eq!(sup_norm(&f), 3.0);
    let l = grid.side();
    let u = TensorField::scalar_from_fn(grid, |p| 0.01 * (2.0 * PI * p[0] / l).sin());
    let h = MetricField::conformal(&u).unwrap().perturbation();
    assert!((sup_norm(&h) - (0.02f64.exp() - 1.0)).abs() < 1e-10);
}

#[test]
fn resample_is_exact_on_cubics() {
    let grid = Grid::new(2, 32, 0.1).unwrap();
    let poly = |x: f64, y: f64| (0.3 * x * x * x - x * x + 0.5 * x - 0.2) * (y * y * y + 0.4 * y * y - 1.1);
    let f = TensorField::scalar_from_fn(grid, |p| poly(p[0], p[1]));
    let mut r = common::rng(4);
    use rand::Rng;
    // stay two cells clear of the periodic seam
    let pts: Vec<[f64; 3]> = (0..200).map(|_| [r.gen_range(-1.2..1.2), r.gen_range(-1.2..1.2), 0.0]).collect();
    for (p, v) in pts.iter().zip(resample(&f, &pts)) {
        assert!((v - poly(p[0], p[1])).abs() < 1e-12, "{p:?}");
    }
}

#[test]
fn resample_wraps_positions() {
    let grid = Grid::new(2, 32, 0.1).unwrap();
    let f = sin_x(grid);
    let l = grid.side();
    let a = resample(&f, &[[0.123, -0.4, 0.0]]);
    let b = resample(&f, &[[0.123 + l, -0.4 - 2.0 * l, 0.0]]);
    assert!((a[0] - b[0]).abs() < 1e-12);
}

#[test]
fn snapshots_roundtrip_and_reject_corruption() {
    let grid = Grid::new(2, 16, 0.25).unwrap();
    let g = common::random_metric(grid, 3, 0.05);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.tfs");
    write_snapshot(g.tensor(), &path).unwrap();
    assert_eq!(&read_snapshot(&path).unwrap(), g.tensor());
    let mut bytes = std::fs::read(&path).unwrap();
    bytes.truncate(bytes.len() - 8);
    std::fs::write(&path, &bytes).unwrap();
    assert!(read_snapshot(&path).is_err());
}

#[test]
fn metric_caches_are_consistent() {
    let grid = Grid::with_side(3, 16, 4.0).unwrap();
    let g = common::random_metric(grid, 9, 0.05);
    for node in common::sample_nodes(&grid, 50, 2) {
        let m = g.matrix(node);
        let inv = common::inverse(&m, 3);
        let gi = g.inverse_matrix(node);
        for i in 0..3 {
            for j in 0..3 {
                assert!((gi[i][j] - inv[i][j]).abs() <= 1e-12 * inv[i][j].abs().max(1.0));
            }
        }
        let det = nalgebra::Matrix3::from_fn(|i, j| m[i][j]).determinant();
        assert!((g.sqrt_det().get(node, 0) / det.sqrt() - 1.0).abs() < 1e-12);
    }
}

fn arb_field(rank: Rank) -> impl Strategy<Value = TensorField> {
    let grid = Grid::new(2, 16, 0.25).unwrap();
    let n = rank.components(2) * grid.len();
    prop::collection::vec(-2.0f64..2.0, n).prop_map(move |v| TensorField::from_data(grid, rank, v).unwrap())
}

fn arb_rank() -> impl Strategy<Value = Rank> {
    prop::sample::select(vec![Rank::Scalar, Rank::Vector, Rank::SymCov2, Rank::Christoffel])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sup_norm_is_a_norm((a, b) in arb_rank().prop_flat_map(|r| (arb_field(r), arb_field(r))), s in -3.0f64..3.0) {
        let na = sup_norm(&a);
        prop_assert!((sup_norm(&a.scale(s)) - s.abs() * na).abs() <= 1e-12 * (1.0 + na));
        let sum = a.axpy(1.0, &b).unwrap();
        prop_assert!(sup_norm(&sum) <= na + sup_norm(&b) + 1e-12);
    }

    #[test]
    fn spectral_norm_matches_eigenvalues(v in prop::collection::vec(-2.0f64..2.0, 6)) {
        let grid = Grid::new(3, 16, 0.25).unwrap();
        let mut h = TensorField::zeros(grid, Rank::SymCov2);
        for (c, x) in v.iter().enumerate() {
            h.set(5, c, *x);
        }
        let m = h.sym_matrix(5);
        let ev = nalgebra::Matrix3::from_fn(|i, j| m[i][j]).symmetric_eigenvalues();
        let expect = ev.iter().fold(0.0f64, |a, e| a.max(e.abs()));
        prop_assert!((h.pointwise_norm(5) - expect).abs() < 1e-12 * (1.0 + expect));
    }

    #[test]
    fn ball_infimum_shrinks_with_radius(f in arb_field(Rank::Scalar), r1 in 0.2f64..1.9, r2 in 0.2f64..1.9) {
        let o = f.grid().origin_node();
        let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
        prop_assert!(ball_infimum(&f, o, hi).unwrap() <= ball_infimum(&f, o, lo).unwrap());
        prop_assert!(ball_infimum(&f, o, hi).unwrap() >= f.min_max().0);
    }

    #[test]
    fn resample_at_nodes_reproduces_values(f in arb_field(Rank::SymCov2), nodes in prop::collection::vec(0usize..256, 1..20)) {
        let grid = *f.grid();
        let pts: Vec<_> = nodes.iter().map(|&k| grid.position(k)).collect();
        let vals = resample(&f, &pts);
        let nc = f.n_components();
        for (j, &k) in nodes.iter().enumerate() {
            for c in 0..nc {
                prop_assert!((vals[j * nc + c] - f.get(k, c)).abs() < 1e-13);
            }
        }
    }
}
