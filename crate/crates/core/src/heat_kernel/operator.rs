//! The scalar operator `A u = a^ij ∂_i∂_j u + b^k ∂_k u`, its exact discrete
//! transpose, and four-stage time stepping for both.

use super::background::{Background, Coefficients};
use crate::error::{LabError, Result};
use crate::grid_tensor::diff::{apply_axis, stencil};
use crate::grid_tensor::{sym_index, Grid};

fn d(grid: &Grid, u: &[f64], axis: usize, order: usize) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    apply_axis(grid, u, axis, stencil(order), grid.dx().powi(-(order as i32)), &mut out);
    out
}

pub(crate) fn apply(c: &Coefficients, u: &[f64]) -> Vec<f64> {
    let grid = *c.a.grid();
    let n = grid.dim();
    let mut out = vec![0.0; u.len()];
    let first: Vec<Vec<f64>> = (0..n).map(|a| d(&grid, u, a, 1)).collect();
    for i in 0..n {
        let dii = d(&grid, u, i, 2);
        let a = c.a.component(sym_index(n, i, i));
        let b = c.b.component(i);
        for k in 0..u.len() {
            out[k] += a[k] * dii[k] + b[k] * first[i][k];
        }
        for j in i + 1..n {
            let dij = d(&grid, &first[i], j, 1);
            let a = c.a.component(sym_index(n, i, j));
            for k in 0..u.len() {
                out[k] += 2.0 * a[k] * dij[k];
            }
        }
    }
    out
}

/// `Aᵀ v = Σ D_ij(a^ij v) - Σ D_k(b^k v)`: second-difference stencils are
/// symmetric, first-difference stencils antisymmetric.
pub(crate) fn apply_transpose(c: &Coefficients, v: &[f64]) -> Vec<f64> {
    let grid = *c.a.grid();
    let n = grid.dim();
    let mut out = vec![0.0; v.len()];
    let weighted = |w: &[f64]| -> Vec<f64> { w.iter().zip(v).map(|(a, b)| a * b).collect() };
    for i in 0..n {
        let av = weighted(c.a.component(sym_index(n, i, i)));
        let dii = d(&grid, &av, i, 2);
        let bv = weighted(c.b.component(i));
        let di = d(&grid, &bv, i, 1);
        for k in 0..v.len() {
            out[k] += dii[k] - di[k];
        }
        for j in i + 1..n {
            let av = weighted(c.a.component(sym_index(n, i, j)));
            let dij = d(&grid, &d(&grid, &av, i, 1), j, 1);
            for k in 0..v.len() {
                out[k] += 2.0 * dij[k];
            }
        }
    }
    out
}

/// Uniform step sequence covering `[s, t]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct StepPlan {
    pub s: f64,
    pub dt: f64,
    pub count: usize,
}

impl StepPlan {
    pub fn new(bg: &Background, s: f64, t: f64, cfl_fraction: f64) -> Result<Self> {
        bg.check_interval(s, t)?;
        let grid = bg.grid();
        let limit = cfl_fraction * grid.dx().powi(2) / (2.0 * grid.dim() as f64 * bg.max_a(s, t));
        let count = ((t - s) / limit - 1e-9).ceil().max(1.0) as usize;
        Ok(Self { s, dt: (t - s) / count as f64, count })
    }

    pub fn with_dt(bg: &Background, s: f64, t: f64, dt: f64, cfl_fraction: f64) -> Result<Self> {
        let auto = Self::new(bg, s, t, cfl_fraction)?;
        let limit = (t - s) / auto.count as f64;
        if dt > limit * (1.0 + 1e-12) {
            return Err(LabError::Cfl { dt, limit });
        }
        let count = ((t - s) / dt - 1e-9).ceil().max(1.0) as usize;
        Ok(Self { s, dt: (t - s) / count as f64, count })
    }

    fn stage_coefficients(&self, bg: &Background, k: usize) -> Result<[Coefficients; 3]> {
        let t0 = self.s + k as f64 * self.dt;
        Ok([bg.at(t0)?, bg.at(t0 + 0.5 * self.dt)?, bg.at(t0 + self.dt)?])
    }
}

fn axpy(x: &[f64], a: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(p, q)| p + a * q).collect()
}

pub(crate) fn forward(bg: &Background, plan: &StepPlan, u0: &[f64]) -> Result<Vec<f64>> {
    let mut u = u0.to_vec();
    let dt = plan.dt;
    for k in 0..plan.count {
        let [c1, c2, c3] = plan.stage_coefficients(bg, k)?;
        let k1 = apply(&c1, &u);
        let k2 = apply(&c2, &axpy(&u, 0.5 * dt, &k1));
        let k3 = apply(&c2, &axpy(&u, 0.5 * dt, &k2));
        let k4 = apply(&c3, &axpy(&u, dt, &k3));
        for i in 0..u.len() {
            u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    check(&u)?;
    Ok(u)
}

/// Transpose of [`forward`]: the same steps applied as `Mᵀ` in reverse order.
pub(crate) fn backward(bg: &Background, plan: &StepPlan, v0: &[f64]) -> Result<Vec<f64>> {
    let mut v = v0.to_vec();
    let dt = plan.dt;
    for k in (0..plan.count).rev() {
        let [c1, c2, c3] = plan.stage_coefficients(bg, k)?;
        let mut u_bar = v.clone();
        let k4_bar: Vec<f64> = v.iter().map(|x| dt / 6.0 * x).collect();
        let mut k3_bar: Vec<f64> = v.iter().map(|x| dt / 3.0 * x).collect();
        let mut k2_bar = k3_bar.clone();
        let mut k1_bar: Vec<f64> = k4_bar.clone();
        let s4 = apply_transpose(&c3, &k4_bar);
        for i in 0..v.len() {
            u_bar[i] += s4[i];
            k3_bar[i] += dt * s4[i];
        }
        let s3 = apply_transpose(&c2, &k3_bar);
        for i in 0..v.len() {
            u_bar[i] += s3[i];
            k2_bar[i] += 0.5 * dt * s3[i];
        }
        let s2 = apply_transpose(&c2, &k2_bar);
        for i in 0..v.len() {
            u_bar[i] += s2[i];
            k1_bar[i] += 0.5 * dt * s2[i];
        }
        let s1 = apply_transpose(&c1, &k1_bar);
        for i in 0..v.len() {
            u_bar[i] += s1[i];
        }
        v = u_bar;
    }
    check(&v)?;
    Ok(v)
}

fn check(u: &[f64]) -> Result<()> {
    if u.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(LabError::NonFinite("scalar heat evolution".into()))
    }
}

/// Binomial `[1, 4, 6, 4, 1] / 16` filter along every axis.
pub(crate) fn smooth(grid: &Grid, u: &[f64]) -> Vec<f64> {
    const BINOMIAL: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
    let mut cur = u.to_vec();
    let mut next = vec![0.0; u.len()];
    for axis in 0..grid.dim() {
        apply_axis(grid, &cur, axis, &BINOMIAL, 1.0, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}
