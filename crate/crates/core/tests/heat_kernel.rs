#![allow(clippy::needless_range_loop)]

mod common;

use std::f64::consts::PI;
use std::sync::OnceLock;

use common::*;
use rand::Rng;
use rdt_lab::deturck_flow::{evolve, FlowConfig, Trajectory};
use rdt_lab::grid_tensor::{partial_derivative, sup_norm, Grid, MetricField, Rank, TensorField};
use rdt_lab::heat_kernel::*;
use rdt_lab::LabError;

/// Conformal-bump flow on a 48² box of side 4, recorded every 0.005 up to 0.2.
fn bump_flow() -> &'static (Grid, Trajectory) {
    static FLOW: OnceLock<(Grid, Trajectory)> = OnceLock::new();
    FLOW.get_or_init(|| {
        let grid = Grid::with_side(2, 48, 4.0).unwrap();
        let g = conformal_bump(grid, 0.04, 0.8);
        let traj = evolve(&g, &FlowConfig::uniform(0.2, 40)).unwrap();
        (grid, traj)
    })
}

fn wrapped_gaussian(grid: &Grid, y: usize, x: usize, tau: f64) -> f64 {
    let d = grid.delta(y, x);
    let l = grid.side();
    let n = grid.dim();
    let mut acc = 0.0;
    for i in -2i32..=2 {
        for j in -2i32..=2 {
            let r2 = (d[0] + i as f64 * l).powi(2) + (d[1] + j as f64 * l).powi(2);
            acc += (-r2 / (4.0 * tau)).exp();
        }
    }
    acc / (4.0 * PI * tau).powf(n as f64 / 2.0)
}

#[test]
fn constants_are_caloric_on_flat_background() {
    let grid = Grid::with_side(2, 32, 4.0).unwrap();
    let bg = Background::frozen(&MetricField::euclidean(grid), 0.1).unwrap();
    let u = TensorField::scalar_from_fn(grid, |_| 2.5);
    let v = evolve_scalar(&u, &bg, 0.0, 0.1).unwrap();
    assert!(v.as_slice().iter().all(|&x| (x - 2.5).abs() < 1e-12));
}

#[test]
fn point_source_matches_wrapped_gaussian() {
    let grid = Grid::with_side(2, 64, 4.0).unwrap();
    let dx2 = grid.dx().powi(2);
    let l2 = grid.side().powi(2);
    let bg = Background::frozen(&MetricField::euclidean(grid), l2 / 100.0).unwrap();
    let y = grid.index([20, 37, 0]);
    for tau in [10.0 * dx2, 40.0 * dx2, l2 / 100.0] {
        let mut delta = TensorField::zeros(grid, Rank::Scalar);
        delta.set(y, 0, 1.0 / grid.cell_volume());
        let raw = evolve_scalar(&delta, &bg, 0.0, tau).unwrap();
        let k = kernel(&bg, y, 0.0, tau).unwrap();
        let mut worst_raw: f64 = 0.0;
        let mut worst_k: f64 = 0.0;
        let mut sup: f64 = 0.0;
        for x in 0..grid.len() {
            let e = wrapped_gaussian(&grid, y, x, tau);
            sup = sup.max(e);
            worst_raw = worst_raw.max((raw.get(x, 0) - e).abs());
            worst_k = worst_k.max((k.field.get(x, 0) - e).abs());
        }
        assert!(worst_raw <= 0.01 * sup, "raw delta at tau = {tau}: {}", worst_raw / sup);
        assert!(worst_k <= 0.01 * sup, "kernel at tau = {tau}: {}", worst_k / sup);
    }
}

#[test]
fn mass_is_conserved_on_flat_background() {
    let grid = Grid::with_side(2, 32, 4.0).unwrap();
    let bg = Background::frozen(&MetricField::euclidean(grid), 0.2).unwrap();
    let mut r = rng(3);
    let vals: Vec<f64> = (0..grid.len()).map(|_| r.gen_range(0.0..1.0)).collect();
    let u = TensorField::from_data(grid, Rank::Scalar, vals).unwrap();
    let v = evolve_scalar(&u, &bg, 0.0, 0.2).unwrap();
    let (m0, m1) = (bg.integrate(&u, 0.0).unwrap(), bg.integrate(&v, 0.2).unwrap());
    assert!((m0 - m1).abs() <= 1e-6 * m0);
}

#[test]
fn adjoint_is_the_exact_transpose() {
    let (grid, traj) = bump_flow();
    let bg = Background::from_trajectory(traj, true).unwrap();
    let bg_nodrift = Background::from_trajectory(traj, false).unwrap();
    let mut r = rng(8);
    let mut noise = || {
        let vals: Vec<f64> = (0..grid.len()).map(|_| r.gen_range(-1.0..1.0)).collect();
        TensorField::from_data(*grid, Rank::Scalar, vals).unwrap()
    };
    let u = noise();
    let v = noise();
    for b in [&bg, &bg_nodrift] {
        let eu = evolve_scalar(&u, b, 0.013, 0.071).unwrap();
        let etv = evolve_scalar_adjoint(&v, b, 0.013, 0.071).unwrap();
        let lhs: f64 = v.as_slice().iter().zip(eu.as_slice()).map(|(a, b)| a * b).sum();
        let rhs: f64 = etv.as_slice().iter().zip(u.as_slice()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }
}

#[test]
fn flat_kernel_has_the_lattice_symmetries() {
    let grid = Grid::with_side(2, 32, 4.0).unwrap();
    let bg = Background::frozen(&MetricField::euclidean(grid), 0.2).unwrap();
    let o = grid.origin_node();
    let k = kernel(&bg, o, 0.0, 0.2).unwrap().field;
    let n = grid.n_ax();
    let oc = grid.origin_coord();
    let refl = |c: usize, a: usize| (2 * oc[a] + n - c) % n;
    for node in 0..grid.len() {
        let c = grid.coord(node);
        let v = k.get(node, 0);
        assert_eq!(v, k.get(grid.index([refl(c[0], 0), c[1], 0]), 0));
        assert_eq!(v, k.get(grid.index([c[0], refl(c[1], 1), 0]), 0));
        let swapped = k.get(grid.index([c[1], c[0], 0]), 0);
        assert!((v - swapped).abs() <= 1e-15 * k.min_max().1);
    }
}

#[test]
fn conjugate_kernel_has_unit_mass_on_evolving_background() {
    let (grid, traj) = bump_flow();
    let bg = Background::from_trajectory(traj, true).unwrap();
    let x = grid.index([26, 22, 0]);
    for (s, t) in [(0.0, 0.08), (0.02, 0.2), (0.1, 0.18)] {
        let k = conjugate_kernel(&bg, x, s, t).unwrap();
        assert!((k.mass - 1.0).abs() <= 1e-10, "{}", k.mass);
        assert!(k.field.min_max().0 >= -1e-10 * k.sup());
        let f = kernel(&bg, x, s, t).unwrap();
        assert!(f.field.min_max().0 >= -1e-10 * f.sup());
    }
}

#[test]
fn conjugate_series_matches_single_kernels() {
    let (grid, traj) = bump_flow();
    let bg = Background::from_trajectory(traj, true).unwrap();
    let x = grid.index([26, 22, 0]);
    let series = conjugate_kernel_series(&bg, x, 0.2, &[0.1, 0.0, 0.05]).unwrap();
    for k in &series {
        let single = conjugate_kernel(&bg, x, k.s, 0.2).unwrap();
        let err = sup_norm(&single.field.sub(&k.field).unwrap());
        assert!(err <= 1e-6 * single.sup(), "s = {}: {}", k.s, err / single.sup());
        assert!((k.mass - 1.0).abs() <= 1e-10);
    }
}

#[test]
fn forward_and_conjugate_kernels_are_one_propagator() {
    let (grid, traj) = bump_flow();
    let bg = Background::from_trajectory(traj, true).unwrap();
    let x = grid.index([26, 22, 0]);
    let y = grid.index([21, 25, 0]);
    let fwd = kernel(&bg, y, 0.02, 0.1).unwrap();
    let conj = conjugate_kernel(&bg, x, 0.02, 0.1).unwrap();
    let (a, b) = (fwd.field.get(x, 0), conj.field.get(y, 0));
    assert!((a - b).abs() <= 1e-12 * a.abs(), "{a} vs {b}");
}

#[test]
fn forward_mass_follows_the_curvature_term() {
    // d/dt ∫u dg_t = -∫(R + div X) u dg_t without drift and -∫R u dg_t with it
    let (grid, traj) = bump_flow();
    for drift in [true, false] {
        let bg = Background::from_trajectory(traj, drift).unwrap();
        let y = grid.index([25, 24, 0]);
        let (t0, t1, t2) = (0.095, 0.1, 0.105);
        let k0 = kernel(&bg, y, 0.0, t0).unwrap();
        let k1 = kernel(&bg, y, 0.0, t1).unwrap();
        let k2 = kernel(&bg, y, 0.0, t2).unwrap();
        let rate = (k2.mass - k0.mass) / (t2 - t0);
        let state = traj.state_at(t1).unwrap();
        let b = rdt_lab::curvature::compute_curvature(&state.g).unwrap();
        let dxs: Vec<_> = (0..2).map(|a| partial_derivative(&b.deturck, a, 1).unwrap()).collect();
        let weight = TensorField::scalar_from_fn(*grid, |_| 0.0);
        let mut pred = weight.clone();
        for node in 0..grid.len() {
            let mut w = b.scalar.get(node, 0);
            if !drift {
                let mut div = 0.0;
                for k in 0..2 {
                    div += dxs[k].get(node, k);
                    for j in 0..2 {
                        div += b.christoffel_at(node, k, k, j) * b.deturck.get(node, j);
                    }
                }
                w += div;
            }
            pred.set(node, 0, -w * k1.field.get(node, 0));
        }
        let predicted = bg.integrate(&pred, t1).unwrap();
        assert!((rate - predicted).abs() <= 0.02 * predicted.abs() + 1e-6, "drift {drift}: {rate:e} vs {predicted:e}");
    }
}

#[test]
fn semigroup_property() {
    let (grid, traj) = bump_flow();
    let bg = Background::from_trajectory(traj, true).unwrap();
    let y = grid.index([24, 27, 0]);
    let (s, m, t) = (0.0, 0.08, 0.2);
    let direct = kernel(&bg, y, s, t).unwrap();
    let first = kernel(&bg, y, s, m).unwrap();
    let composed = propagate(&first.field, &bg, m, t).unwrap();
    let err = sup_norm(&direct.field.sub(&composed).unwrap());
    assert!(err <= 2e-3 * direct.sup(), "{}", err / direct.sup());
}

#[test]
fn evolution_preserves_order() {
    let (grid, traj) = bump_flow();
    let bg = Background::from_trajectory(traj, true).unwrap();
    for seed in 0..4 {
        let mut r = rng(seed);
        let u = Modes::random(&mut r, 2, grid.side(), 0.3, 4).field(*grid);
        let w = Modes::random(&mut r, 2, grid.side(), 0.1, 3).field(*grid).map(|v| v * v + 0.01);
        let v = u.axpy(1.0, &w).unwrap();
        let eu = evolve_scalar(&u, &bg, 0.0, 0.1).unwrap();
        let ev = evolve_scalar(&v, &bg, 0.0, 0.1).unwrap();
        for i in 0..grid.len() {
            assert!(eu.get(i, 0) <= ev.get(i, 0) + 1e-10);
        }
    }
}

#[test]
fn gaussian_fit_on_flat_background() {
    let fit_at = |n_ax: usize| {
        // side 8 keeps every sample time below L²/100
        let grid = Grid::with_side(2, n_ax, 8.0).unwrap();
        let bg = Background::frozen(&MetricField::euclidean(grid), 0.64).unwrap();
        let x = grid.origin_node();
        let sources: Vec<f64> = (0..10).map(|k| 0.64 - 0.16 * (1.0 + k as f64 / 3.0)).collect();
        let samples = conjugate_kernel_series(&bg, x, 0.64, &sources).unwrap();
        (fit_gaussian_bound(&samples, &bg).unwrap(), samples, bg)
    };
    let (fit, samples, bg) = fit_at(64);
    let flat = 1.0 / (4.0 * PI);
    assert_eq!(fit.d, 4.5);
    assert!(fit.c2_pointwise >= flat / 2.0 && fit.c2_pointwise <= 2.0 * flat, "{}", fit.c2_pointwise);
    assert!(fit.c2_tail >= 0.5 && fit.c2_tail <= 2.0, "{}", fit.c2_tail);
    for s in &samples {
        let grid = s.field.grid();
        for i in 0..grid.len() {
            let d = grid.distance(s.anchor, i);
            assert!(s.field.get(i, 0) <= fit.pointwise_bound(2, s.elapsed(), d) * (1.0 + 1e-12));
        }
        for r in [0.2, 0.5, 1.0] {
            assert!(s.tail_mass(&bg, r).unwrap() <= fit.tail_bound(s.elapsed(), r) * (1.0 + 1e-12));
        }
    }
    let (fine, _, _) = fit_at(128);
    assert_eq!(fine.d, fit.d);
    assert!((fine.c2 - fit.c2).abs() <= 0.1 * fit.c2);
}

#[test]
fn flat_fit_is_invariant_under_parabolic_rescaling() {
    let fit_at = |side: f64| {
        let lambda = side / 4.0;
        let grid = Grid::with_side(2, 32, side).unwrap();
        let bg = Background::frozen(&MetricField::euclidean(grid), 0.64 * lambda * lambda).unwrap();
        let t = 0.64 * lambda * lambda;
        let sources: Vec<f64> = (0..10).map(|k| t - 0.16 * (1.0 + k as f64 / 3.0) * lambda * lambda).collect();
        let samples = conjugate_kernel_series(&bg, grid.origin_node(), t, &sources).unwrap();
        fit_gaussian_bound(&samples, &bg).unwrap()
    };
    let (a, b) = (fit_at(4.0), fit_at(8.0));
    assert_eq!(a.d, b.d);
    assert!((a.c2_pointwise - b.c2_pointwise).abs() <= 1e-9 * a.c2_pointwise);
    assert!((a.c2_tail - b.c2_tail).abs() <= 1e-9 * a.c2_tail);
}

#[test]
fn fit_rejects_too_few_or_too_narrow_samples() {
    let grid = Grid::with_side(2, 32, 4.0).unwrap();
    let bg = Background::frozen(&MetricField::euclidean(grid), 0.4).unwrap();
    let x = grid.origin_node();
    let narrow: Vec<_> = (0..10).map(|k| conjugate_kernel(&bg, x, 0.0, 0.16 + 0.02 * k as f64).unwrap()).collect();
    assert!(fit_gaussian_bound(&narrow, &bg).is_err());
    assert!(fit_gaussian_bound(&narrow[..5], &bg).is_err());
}

#[test]
fn kernel_rejects_unresolved_times() {
    let grid = Grid::with_side(2, 32, 4.0).unwrap();
    let bg = Background::frozen(&MetricField::euclidean(grid), 0.4).unwrap();
    let tiny = 5.0 * grid.dx().powi(2);
    assert!(matches!(kernel(&bg, 0, 0.0, tiny), Err(LabError::Resolution(_))));
    assert!(matches!(conjugate_kernel(&bg, 0, 0.1, 0.1 + tiny), Err(LabError::Resolution(_))));
}

#[test]
fn curvature_is_a_supersolution() {
    let (grid, traj) = bump_flow();
    let bg = Background::from_trajectory(traj, true).unwrap();
    let mut r = rng(77);
    let mut checked = 0;
    while checked < 10 {
        let x = r.gen_range(0..grid.len());
        let s = 0.005 * r.gen_range(0..30) as f64;
        let t = s + 0.005 * r.gen_range(2..10) as f64;
        if t > 0.2 {
            continue;
        }
        let (lhs, rhs) = supersolution_bound(&bg, x, s, t).unwrap();
        assert!(lhs - rhs >= -1e-4 * (1.0 + rhs.abs()), "x {x}, s {s}, t {t}: {lhs} < {rhs}");
        checked += 1;
    }
}

#[test]
fn flat_flow_gives_trivial_supersolution_and_constant_averages() {
    let grid = Grid::with_side(2, 32, 4.0).unwrap();
    let bg = Background::frozen(&MetricField::euclidean(grid), 0.2).unwrap();
    assert_eq!(supersolution_bound(&bg, 5, 0.0, 0.2).unwrap(), (0.0, 0.0));
    let c = TensorField::scalar_from_fn(grid, |_| -1.5);
    let avg = propagate(&c, &bg, 0.0, 0.2).unwrap();
    assert!(avg.as_slice().iter().all(|v| (v + 1.5).abs() < 1e-12));
}
