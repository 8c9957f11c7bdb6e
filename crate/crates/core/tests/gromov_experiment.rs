mod common;

use std::f64::consts::PI;
use std::sync::OnceLock;

use proptest::prelude::*;
use rdt_lab::curvature::compute_curvature;
use rdt_lab::grid_tensor::{sup_derivative_norm, Grid, MetricField, TensorField};
use rdt_lab::gromov_experiment::*;
use rdt_lab::heat_kernel::GaussianFit;
use rdt_lab::LabError;

fn fit(c2: f64, d: f64) -> GaussianFit {
    GaussianFit { c2, c2_pointwise: c2, c2_tail: c2, d, valid_pairs: 0, table: Vec::new() }
}

/// Partial sums of the loss series, summed directly until the terms are far
/// below `delta` and decreasing.
fn oracle_tail(k0: usize, c2: f64, c3: f64, theta: f64, c: f64, lambda: f64, delta: f64) -> f64 {
    let term = |k: usize| (2.0 * c2 * c3).ln() - k as f64 * (1.0 - theta).ln() - c * (1.0 + lambda).powi(k as i32);
    let mut sum = 0.0;
    let mut k = k0;
    loop {
        let t = term(k).exp();
        sum += t;
        if t < 1e-30 * delta && term(k + 1) < term(k) {
            return sum;
        }
        k += 1;
    }
}

#[test]
fn constants_at_theta_019() {
    for d in [4.5, 8.0] {
        let k = derive_constants(0.19, &fit(1.0, d), 0.05, 0.1, None).unwrap();
        assert!((k.beta - 0.05).abs() < 1e-15);
        assert!(((1.0 - k.beta).powi(2) / 0.81 - 0.9025 / 0.81).abs() < 1e-15);
        assert!((k.lambda - 0.0571).abs() < 5e-5, "lambda {}", k.lambda);
        assert_eq!(k.c, k.beta * k.beta / (d * 0.19));
        assert!((k.c - 0.0025 / (0.19 * d)).abs() < 1e-15);
        assert!(k.all_invariants_hold(), "{:?}", k.invariants());
        let tail = |n| oracle_tail(n, 1.0, 0.05, 0.19, k.c, k.lambda, 0.1);
        assert!(tail(k.n) < 0.1);
        assert!(tail(k.n - 1) >= 0.1);
        assert_eq!(k.tau, 0.81f64.powi(k.n as i32));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn constant_ledger_is_sound(
        theta in 0.05f64..0.45,
        d in prop::sample::select(vec![4.5, 5.0, 6.0, 8.0, 12.0, 16.0]),
        c2 in 0.05f64..3.0,
        c3 in 0.001f64..2.0,
        delta in 0.01f64..1.0,
    ) {
        let k = derive_constants(theta, &fit(c2, d), c3, delta, None).unwrap();
        prop_assert!(k.all_invariants_hold(), "{:?}", k.invariants());
        let tail = |n| oracle_tail(n, c2, c3, theta, k.c, k.lambda, delta);
        prop_assert!(tail(k.n) < delta);
        if k.n > 1 {
            prop_assert!(tail(k.n - 1) >= delta);
        }
        prop_assert!((k.tail_sum(k.n) - tail(k.n)).abs() <= 1e-9 * tail(k.n).max(1e-300));
    }
}

#[test]
fn ladder_sequences() {
    let k = derive_constants(0.19, &fit(1.0, 4.5), 0.05, 0.1, None).unwrap();
    for j in 0..200 {
        assert_eq!(k.t(j), 0.81f64.powi(j as i32));
        assert_eq!(k.r(j), 1.0 - 0.95f64.powi(j as i32));
        assert!(k.t(j + 1) < k.t(j));
        assert!(k.r(j + 1) > k.r(j) && k.r(j + 1) < 1.0);
    }
}

#[test]
fn unresolved_tau_is_rejected() {
    let dx: f64 = 4.0 / 64.0;
    let err = derive_constants(0.19, &fit(1.0, 4.5), 0.05, 0.1, Some(20.0 * dx * dx)).unwrap_err();
    assert!(matches!(err, LabError::Resolution(_)), "{err}");
    // a vanishing C₃ makes the first rung already admissible
    let k = derive_constants(0.19, &fit(1.0, 4.5), 1e-200, 0.1, Some(20.0 * dx * dx)).unwrap();
    assert_eq!(k.n, 1);
}

#[test]
fn invalid_constants_are_rejected() {
    for (theta, c3, delta) in [(0.5, 0.1, 0.1), (0.0, 0.1, 0.1), (0.2, 0.0, 0.1), (0.2, 0.1, 0.0), (0.2, f64::NAN, 0.1)]
    {
        assert!(derive_constants(theta, &fit(1.0, 4.5), c3, delta, None).is_err());
    }
    assert!(derive_constants(0.2, &fit(0.0, 4.5), 0.1, 0.1, None).is_err());
}

fn grid64() -> Grid {
    Grid::with_side(2, 64, 4.0).unwrap()
}

fn spike_family() -> &'static MetricFamily {
    static F: OnceLock<MetricFamily> = OnceLock::new();
    F.get_or_init(|| make_family(FamilyKind::ConformalSpike, grid64(), -1.5, 3, 0.1).unwrap())
}

/// `-2 e^{-2u} Δu` with a five-point Laplacian of step `1e-4` on the exact `u`.
fn conformal_scalar(u: impl Fn(f64, f64) -> f64, x: f64, y: f64) -> f64 {
    let h = 1e-4;
    let lap = (u(x + h, y) + u(x - h, y) + u(x, y + h) + u(x, y - h) - 4.0 * u(x, y)) / (h * h);
    -2.0 * (-2.0 * u(x, y)).exp() * lap
}

fn spike_u(i: usize, kappa: f64) -> impl Fn(f64, f64) -> f64 {
    let c = 0.55 / 1.5 * kappa.abs();
    let sigma = 0.5 * 0.8f64.powi(i as i32 - 1);
    let f = (i + 1) as f64;
    move |x, y| {
        let mut w = 0.0;
        for k in 1..200 {
            let q = PI * k as f64;
            w += 2.0 * c * (-0.5 * sigma * sigma * q * q).exp() * (q * f * x).cos() / (q * q);
        }
        w * common::smooth_step((x * x + y * y).sqrt(), 0.4, 0.95) / (f * f)
    }
}

#[test]
fn spike_family_members() {
    let fam = spike_family();
    assert_eq!(fam.members.len(), 3);
    let mut d2 = Vec::new();
    for m in &fam.members {
        assert!(m.min_r >= -1.5 - 2.5e-3, "member {} min R {}", m.index, m.min_r);
        assert!(m.metric.bilipschitz() <= 1.1);
        d2.push(sup_derivative_norm(m.metric.tensor(), 2).unwrap());
    }
    let d0: Vec<f64> = fam.members.iter().map(|m| m.distance_to_limit).collect();
    assert!(d0.windows(2).all(|w| w[1] < w[0]), "{d0:?}");
    assert!(d2.windows(2).all(|w| w[1] > w[0]), "{d2:?}");
    assert!(d2[2] / d0[2] > 2.0 * d2[0] / d0[0], "{d2:?} {d0:?}");
    assert_eq!(fam.limit, MetricField::euclidean(grid64()));
}

#[test]
fn spike_member_curvature_matches_closed_form() {
    let mut errs = Vec::new();
    for n in [64, 128, 256] {
        let grid = Grid::with_side(2, n, 4.0).unwrap();
        let fam = make_family(FamilyKind::ConformalSpike, grid, -1.5, 3, 0.1).unwrap();
        let r = compute_curvature(&fam.members[0].metric).unwrap().scalar;
        let u = spike_u(1, -1.5);
        let err = (0..grid.len())
            .map(|node| {
                let p = grid.position(node);
                (r.get(node, 0) - conformal_scalar(&u, p[0], p[1])).abs()
            })
            .fold(0.0, f64::max);
        errs.push(err);
    }
    // the C∞ step in the bump keeps 64² and 128² short of the asymptotic rate
    assert!(errs[2] < 2e-3, "{errs:?}");
    assert!(errs.windows(2).all(|w| w[0] / w[1] > 5.0), "{errs:?}");
}

#[test]
fn smooth_family_converges_with_vanishing_curvature() {
    let fam = make_family(FamilyKind::SmoothConverging, grid64(), -0.5, 4, 0.1).unwrap();
    let sup_r: Vec<f64> = fam
        .members
        .iter()
        .map(|m| {
            let (lo, hi) = compute_curvature(&m.metric).unwrap().scalar.min_max();
            lo.abs().max(hi.abs())
        })
        .collect();
    for (k, w) in sup_r.windows(2).enumerate() {
        assert!(w[1] < w[0]);
        // R(e^{2u/i}) = -(2/i) e^{-2u/i} Δu decays like 1/i
        let ratio = w[0] / w[1];
        let expected = (k + 2) as f64 / (k + 1) as f64;
        assert!((ratio / expected - 1.0).abs() < 0.05, "ratio {ratio} vs {expected}");
    }
    assert!(fam.members.iter().all(|m| m.min_r >= -0.5 - 1.5e-3));
}

#[test]
fn glued_family_keeps_the_ball() {
    let grid = Grid::with_side(2, 96, 6.0).unwrap();
    let spikes = make_family(FamilyKind::ConformalSpike, grid, -1.5, 3, 0.1).unwrap();
    let glued = make_family(FamilyKind::Glued, grid, -1.5, 3, 0.1).unwrap();
    let o = grid.origin_node();
    let reach = 1.0 - 3.0 * grid.dx();
    for (a, b) in spikes.members.iter().zip(&glued.members) {
        let ra = compute_curvature(&a.metric).unwrap().scalar;
        let rb = compute_curvature(&b.metric).unwrap().scalar;
        for node in 0..grid.len() {
            let d = grid.distance(o, node);
            if d <= 1.0 {
                assert_eq!(a.metric.matrix(node), b.metric.matrix(node));
            }
            if d <= reach {
                assert_eq!(ra.get(node, 0), rb.get(node, 0), "node {node}");
            }
        }
    }
    assert_eq!(glued.limit, MetricField::euclidean(grid));
    let err = make_family(FamilyKind::Glued, grid64(), -1.5, 3, 0.1).unwrap_err();
    assert!(err.to_string().contains("box side"), "{err}");
}

#[test]
fn gluing_examples() {
    let grid = grid64();
    let phi = cutoff(grid, 1.0, 1.8).unwrap();
    let flat = MetricField::euclidean(grid);
    assert_eq!(glue_to_euclidean(&flat, &phi).unwrap(), flat);
    let g = common::random_metric(grid, 11, 0.03);
    let ones = TensorField::scalar_from_fn(grid, |_| 1.0);
    assert_eq!(glue_to_euclidean(&g, &ones).unwrap(), g);
    let glued = glue_to_euclidean(&g, &phi).unwrap();
    assert!(glued.bilipschitz() <= g.bilipschitz());
    for node in 0..grid.len() {
        if phi.get(node, 0) == 0.0 {
            assert_eq!(glued.matrix(node), flat.matrix(node));
        }
    }
    let bad = TensorField::scalar_from_fn(grid, |_| 1.5);
    assert!(glue_to_euclidean(&g, &bad).is_err());
    let short = cutoff(grid, 0.5, 1.8).unwrap();
    assert!(glue_to_euclidean(&g, &short).is_err());
}

#[test]
fn invalid_families_are_rejected() {
    let grid = grid64();
    assert!(make_family(FamilyKind::ConformalSpike, grid, -1.5, 2, 0.1).is_err());
    assert!(make_family(FamilyKind::ConformalSpike, grid, 0.0, 3, 0.1).is_err());
    let grid3 = Grid::with_side(3, 16, 4.0).unwrap();
    assert!(make_family(FamilyKind::ConformalSpike, grid3, -1.5, 3, 0.1).is_err());
    // ε too small for the spike members
    assert!(make_family(FamilyKind::ConformalSpike, grid, -1.5, 3, 0.001).is_err());
    for kind in
        [FamilyKind::ConformalSpike, FamilyKind::SmoothConverging, FamilyKind::Glued, FamilyKind::NegativeControl]
    {
        assert_eq!(FamilyKind::from_name(kind.name()), Some(kind));
    }
}

#[test]
fn flat_ladder_is_trivial() {
    let settings = LadderSettings::default();
    let consts = derive_constants(0.19, &fit(1.0, 4.5), 1e-200, 0.1, None).unwrap();
    let report = run_ladder(&MetricField::euclidean(grid64()), -0.1, &consts, &settings).unwrap();
    assert_eq!(*settings.rungs(grid64().dx()).start(), 6);
    assert_eq!(report.rows.len(), 7);
    for row in &report.rows {
        assert_eq!(row.a, 0.0);
        assert_eq!(row.origin, 0.0);
        if let Some(s) = row.slack {
            assert_eq!(s, consts.loss(row.k));
            assert!(s > 0.0);
        }
    }
    assert_eq!(report.verdict.from_n, Some(true));
    assert!(report.verdict.passed());
    assert_eq!(report.unresolved, None);
}

#[test]
fn spike_ladder_respects_the_recursion() {
    let settings = LadderSettings::default();
    let mut mins = Vec::new();
    for n in [48, 64] {
        let grid = Grid::with_side(2, n, 4.0).unwrap();
        let fam = make_family(FamilyKind::ConformalSpike, grid, -1.5, 3, 0.1).unwrap();
        let (_, report) = ladder_experiment(&fam.members[2].metric, -1.5, &settings).unwrap();
        let c = &report.constants;
        assert!(c.all_invariants_hold());
        assert!((c.d - 4.5).abs() < 1e-12 || c.d > 4.5);
        for row in &report.rows {
            if let Some(s) = row.slack {
                assert!(s >= -1e-3 * (1.0 + row.a.abs()), "k {} slack {s}", row.k);
            }
            assert!(row.origin > -1.6);
        }
        assert!(report.verdict.passed());
        // the resolved rungs stop far above t_N
        assert!(report.verdict.is_vacuous());
        let (lo, hi) = report.unresolved.unwrap();
        assert_eq!(hi, c.n);
        assert_eq!(lo, report.rows.last().unwrap().k + 1);
        // maximum principle: the ball infima never undercut the global minimum
        let min_a = report.rows.iter().map(|r| r.a).fold(f64::INFINITY, f64::min);
        assert!(min_a >= report.min_recorded_r - 1e-12);
        mins.push(min_a);
    }
    assert!(mins.iter().all(|&m| m >= -1.5 - 0.1), "{mins:?}");
}

#[test]
fn ladder_needs_curvature_above_a() {
    let settings = LadderSettings::default();
    let consts = derive_constants(0.19, &fit(1.0, 4.5), 0.05, 0.1, None).unwrap();
    let m = &spike_family().members[0].metric;
    assert!(run_ladder(m, -1.0, &consts, &settings).is_err());
    let coarse = Grid::with_side(2, 16, 4.0).unwrap();
    let err = run_ladder(&MetricField::euclidean(coarse), -0.1, &consts, &settings).unwrap_err();
    assert!(matches!(err, LabError::Resolution(_)), "{err}");
}

#[test]
fn theorem_preconditions() {
    let fam = spike_family();
    let s = TheoremSettings::default();
    assert!(verify_theorem(fam, -1.5, -1.7, &s).is_err());
    // δ = 0.1 leaves no room between κ'' - δ and κ'
    assert!(verify_theorem(fam, -1.55, -1.5, &s).is_err());
    // the members dip below κ'' = -1
    assert!(verify_theorem(fam, -1.5, -1.0, &s).is_err());
}
