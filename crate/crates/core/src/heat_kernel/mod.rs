//! Drift heat equation `∂_t u = Δ_{g_t} u - X·∇u` on an evolving Ricci DeTurck
//! background, its fundamental solution, and Gaussian bounds for it.
//!
//! The discrete kernel is the propagator of the time-stepped equation. Its
//! forward columns (fixed source `y`) come from evolving a point source, and
//! its rows (fixed target `x`) from the exact transpose of the stepping, which
//! is the discrete conjugate heat equation in the source variables.

mod background;
mod fit;
mod operator;

pub use background::{Background, Coefficients};
pub use fit::{fit_gaussian_bound, GaussianFit, D_GRID};

use crate::error::{LabError, Result};
use crate::grid_tensor::{Rank, TensorField};
use operator::{backward, forward, smooth, StepPlan};

/// Default fraction of the parabolic step limit for scalar evolutions.
pub const SCALAR_CFL: f64 = 0.2;

/// Smallest admissible `t - s` in units of `dx²`.
pub const MIN_KERNEL_TIME: f64 = 10.0;

/// Heat time absorbed by the binomial smoothing of the point source.
pub fn smoothing_time(dx: f64) -> f64 {
    // the filter has variance dx² per axis, the heat kernel 2τ
    0.5 * dx * dx
}

/// Solves `∂_t u = a^ij ∂_i∂_j u + b^k ∂_k u` from `u_s` at time `s` to `t`.
pub fn evolve_scalar(u_s: &TensorField, bg: &Background, s: f64, t: f64) -> Result<TensorField> {
    evolve_scalar_with(u_s, bg, s, t, None)
}

/// [`evolve_scalar`] with an optional fixed step, rejected if unstable.
pub fn evolve_scalar_with(u_s: &TensorField, bg: &Background, s: f64, t: f64, dt: Option<f64>) -> Result<TensorField> {
    check_scalar(u_s, bg)?;
    let plan = match dt {
        Some(dt) => StepPlan::with_dt(bg, s, t, dt, SCALAR_CFL)?,
        None => StepPlan::new(bg, s, t, SCALAR_CFL)?,
    };
    TensorField::from_data(*u_s.grid(), Rank::Scalar, forward(bg, &plan, u_s.as_slice())?)
}

/// Transpose of [`evolve_scalar`]: for every pair of fields,
/// `<v, E u> = <Eᵀ v, u>` in the plain node sum.
pub fn evolve_scalar_adjoint(v_t: &TensorField, bg: &Background, s: f64, t: f64) -> Result<TensorField> {
    check_scalar(v_t, bg)?;
    let plan = StepPlan::new(bg, s, t, SCALAR_CFL)?;
    TensorField::from_data(*v_t.grid(), Rank::Scalar, backward(bg, &plan, v_t.as_slice())?)
}

fn check_scalar(u: &TensorField, bg: &Background) -> Result<()> {
    if u.rank() != Rank::Scalar {
        return Err(LabError::invalid("heat evolution acts on scalar fields"));
    }
    u.grid().check_same(bg.grid())
}

/// Which variable of `K(x, t; y, s)` the snapshot field runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Field in `x` for a fixed source `y`.
    Forward,
    /// Field in `y` for a fixed target `x`.
    Conjugate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSnapshot {
    pub orientation: Orientation,
    /// The fixed node: `y` for forward snapshots, `x` for conjugate ones.
    pub anchor: usize,
    pub s: f64,
    pub t: f64,
    pub field: TensorField,
    /// `∫ K dg` over the free variable: `dg_s(y)` for conjugate snapshots,
    /// `dg_t(x)` for forward ones.
    pub mass: f64,
}

impl KernelSnapshot {
    pub fn elapsed(&self) -> f64 {
        self.t - self.s
    }

    pub fn sup(&self) -> f64 {
        self.field.min_max().1
    }

    /// Tail mass `∫_{d(anchor, ·) ≥ r} K dg` over the free variable.
    pub fn tail_mass(&self, bg: &Background, r: f64) -> Result<f64> {
        let time = match self.orientation {
            Orientation::Forward => self.t,
            Orientation::Conjugate => self.s,
        };
        let w = bg.sqrt_det_at(time)?;
        let grid = self.field.grid();
        let k = self.field.component(0);
        Ok((0..grid.len()).filter(|&i| grid.distance(self.anchor, i) >= r).map(|i| k[i] * w.get(i, 0)).sum::<f64>()
            * grid.cell_volume())
    }
}

fn check_kernel_times(bg: &Background, s: f64, t: f64) -> Result<()> {
    let dx = bg.grid().dx();
    if t - s < MIN_KERNEL_TIME * dx * dx {
        return Err(LabError::Resolution(format!(
            "t - s = {:e} is below {MIN_KERNEL_TIME} dx² = {:e}; the kernel is not resolved",
            t - s,
            MIN_KERNEL_TIME * dx * dx
        )));
    }
    bg.check_interval(s, t)
}

/// Forward kernel `K(·, t; y, s)`: a unit point source at `y` (mass one under
/// `dg_s`), smoothed by one binomial pass that stands in for the first
/// [`smoothing_time`] of evolution, then evolved to `t`.
pub fn kernel(bg: &Background, y: usize, s: f64, t: f64) -> Result<KernelSnapshot> {
    check_kernel_times(bg, s, t)?;
    let grid = *bg.grid();
    let w_s = bg.sqrt_det_at(s)?;
    let mut delta = vec![0.0; grid.len()];
    delta[y] = 1.0 / (w_s.get(y, 0) * grid.cell_volume());
    let u0 = smooth(&grid, &delta);
    let plan = StepPlan::new(bg, s + smoothing_time(grid.dx()), t, SCALAR_CFL)?;
    let field = TensorField::from_data(grid, Rank::Scalar, forward(bg, &plan, &u0)?)?;
    let mass = bg.integrate(&field, t)?;
    Ok(KernelSnapshot { orientation: Orientation::Forward, anchor: y, s, t, field, mass })
}

/// Conjugate kernel `K(x, t; ·, s)`, the row of the same discrete propagator
/// as [`kernel`], computed by the transposed stepping.
pub fn conjugate_kernel(bg: &Background, x: usize, s: f64, t: f64) -> Result<KernelSnapshot> {
    check_kernel_times(bg, s, t)?;
    let grid = *bg.grid();
    let mut e = vec![0.0; grid.len()];
    e[x] = 1.0;
    let plan = StepPlan::new(bg, s + smoothing_time(grid.dx()), t, SCALAR_CFL)?;
    let row = smooth(&grid, &backward(bg, &plan, &e)?);
    let w_s = bg.sqrt_det_at(s)?;
    let vol = grid.cell_volume();
    let data: Vec<f64> = row.iter().zip(w_s.component(0)).map(|(p, w)| p / (w * vol)).collect();
    let field = TensorField::from_data(grid, Rank::Scalar, data)?;
    let mass = bg.integrate(&field, s)?;
    Ok(KernelSnapshot { orientation: Orientation::Conjugate, anchor: x, s, t, field, mass })
}

/// Conjugate kernels `K(x, t; ·, s)` for several source times `s < t` from a
/// single backward sweep, returned in the order of `sources`.
pub fn conjugate_kernel_series(bg: &Background, x: usize, t: f64, sources: &[f64]) -> Result<Vec<KernelSnapshot>> {
    for &s in sources {
        check_kernel_times(bg, s, t)?;
    }
    let grid = *bg.grid();
    let sigma = smoothing_time(grid.dx());
    let vol = grid.cell_volume();
    let mut order: Vec<usize> = (0..sources.len()).collect();
    order.sort_by(|&a, &b| sources[b].total_cmp(&sources[a]));
    let mut v = vec![0.0; grid.len()];
    v[x] = 1.0;
    let mut top = t;
    let mut out: Vec<Option<KernelSnapshot>> = vec![None; sources.len()];
    for k in order {
        let s = sources[k];
        if s + sigma < top {
            let plan = StepPlan::new(bg, s + sigma, top, SCALAR_CFL)?;
            v = backward(bg, &plan, &v)?;
            top = s + sigma;
        }
        let row = smooth(&grid, &v);
        let w_s = bg.sqrt_det_at(s)?;
        let data: Vec<f64> = row.iter().zip(w_s.component(0)).map(|(p, w)| p / (w * vol)).collect();
        let field = TensorField::from_data(grid, Rank::Scalar, data)?;
        let mass = bg.integrate(&field, s)?;
        out[k] = Some(KernelSnapshot { orientation: Orientation::Conjugate, anchor: x, s, t, field, mass });
    }
    Ok(out.into_iter().map(|k| k.expect("every source visited")).collect())
}

/// Applies the kernel propagator (smoothing plus evolution from `s` to `t`) to a
/// field: `u ↦ ∫ K(·, t; y, s) u(y) dg_s(y)`.
pub fn propagate(u_s: &TensorField, bg: &Background, s: f64, t: f64) -> Result<TensorField> {
    check_scalar(u_s, bg)?;
    check_kernel_times(bg, s, t)?;
    let grid = *bg.grid();
    let plan = StepPlan::new(bg, s + smoothing_time(grid.dx()), t, SCALAR_CFL)?;
    let u0 = smooth(&grid, u_s.as_slice());
    TensorField::from_data(grid, Rank::Scalar, forward(bg, &plan, &u0)?)
}

/// Both sides of `R(x, t) ≥ ∫ K(x, t; y, s) R(y, s) dg_s(y)`: returns
/// `(R(x, t), kernel average of R(·, s))`, the average taken with the
/// unregularized propagator of the scalar equation.
pub fn supersolution_bound(bg: &Background, x: usize, s: f64, t: f64) -> Result<(f64, f64)> {
    let r_s = bg.scalar_at(s)?;
    let avg = evolve_scalar(&r_s, bg, s, t)?;
    Ok((bg.scalar_at(t)?.get(x, 0), avg.get(x, 0)))
}
