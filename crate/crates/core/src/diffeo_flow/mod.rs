//! The DeTurck diffeomorphisms `∂_t Φ_t = X(g_t) ∘ Φ_t` and the Ricci flow
//! `g̃_t = Φ_t^* g_t` they pull back to.
//!
//! Φ is tracked on nodes (Lagrangian), as a periodic displacement field
//! `Φ_t(x) - x`, so the maps are diffeomorphisms of the torus.

use rayon::prelude::*;

use crate::curvature::{compute_curvature, CurvatureBundle};
use crate::deturck_flow::FlowState;
use crate::error::{LabError, Result};
use crate::grid_tensor::{
    partial_derivative, resample, sup_norm, sym_index, Grid, MetricField, Rank, TensorField, MAX_DIM,
};

/// Tracked maps `Φ_t` at a sequence of sample times.
#[derive(Debug, Clone)]
pub struct DiffeoTrack {
    grid: Grid,
    times: Vec<f64>,
    /// `Φ_t(x) - x` per sample, a vector field.
    displacements: Vec<TensorField>,
    /// `max_x |Φ_t(x) - x|` per sample.
    pub max_displacement: Vec<f64>,
    /// `sup |X|` of every flow state used by the integration.
    pub sup_velocity: f64,
    /// Time at which the displacement first reached `L/4`; the track stops at
    /// the last sample before it.
    pub truncated_at: Option<f64>,
}

impl DiffeoTrack {
    /// A track from explicit displacement fields `Φ_t(x) - x`.
    pub fn from_displacements(times: Vec<f64>, displacements: Vec<TensorField>) -> Result<Self> {
        let first = displacements.first().ok_or_else(|| LabError::invalid("empty track"))?;
        let grid = *first.grid();
        if times.len() != displacements.len() {
            return Err(LabError::invalid("one displacement field per sample time"));
        }
        for d in &displacements {
            d.grid().check_same(&grid)?;
            if d.rank() != Rank::Vector {
                return Err(LabError::invalid("displacements must be vector fields"));
            }
            d.check_finite("displacement")?;
        }
        let max_displacement = displacements.iter().map(sup_norm).collect();
        Ok(Self { grid, times, displacements, max_displacement, sup_velocity: f64::NAN, truncated_at: None })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn displacement(&self, k: usize) -> &TensorField {
        &self.displacements[k]
    }

    /// Sample index of time `t`, if it was tracked.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
    }

    /// `Φ_t` at every node, in real (unwrapped) coordinates.
    pub fn positions(&self, k: usize) -> Vec<[f64; MAX_DIM]> {
        let d = &self.displacements[k];
        let n = self.grid.dim();
        (0..self.grid.len())
            .map(|node| {
                let mut p = self.grid.position(node);
                for (a, v) in p.iter_mut().enumerate().take(n) {
                    *v += d.get(node, a);
                }
                p
            })
            .collect()
    }

    /// `sup_x |Φ_t(x) - Φ_s(x)| / |t - s|` over consecutive samples.
    pub fn drift_speed(&self) -> f64 {
        self.times
            .windows(2)
            .zip(self.displacements.windows(2))
            .map(|(t, d)| sup_norm(&d[1].sub(&d[0]).expect("same layout")) / (t[1] - t[0]))
            .fold(0.0, f64::max)
    }
}

fn velocity_at(x: &TensorField, pos: &[[f64; MAX_DIM]], dim: usize) -> Vec<[f64; MAX_DIM]> {
    let vals = resample(x, pos);
    (0..pos.len())
        .map(|p| {
            let mut v = [0.0; MAX_DIM];
            v[..dim].copy_from_slice(&vals[p * dim..(p + 1) * dim]);
            v
        })
        .collect()
}

fn shifted(pos: &[[f64; MAX_DIM]], a: f64, v: &[[f64; MAX_DIM]]) -> Vec<[f64; MAX_DIM]> {
    pos.iter().zip(v).map(|(p, q)| [p[0] + a * q[0], p[1] + a * q[1], p[2] + a * q[2]]).collect()
}

/// Integrates `∂_t Φ = X(g_t) ∘ Φ` from the identity at the first state.
///
/// Each RK4 step spans two record intervals, taking the middle record as the
/// half step, so the states must come in equally spaced triples and the
/// samples are every other state. Velocities are cubic interpolations of the
/// DeTurck field at the moving positions.
pub fn integrate_diffeo(states: &[FlowState]) -> Result<DiffeoTrack> {
    let first = states.first().ok_or_else(|| LabError::invalid("no flow states to integrate"))?;
    let grid = *first.g.grid();
    let n = grid.dim();
    for w in states.windows(2) {
        w[1].g.grid().check_same(&grid)?;
        if !(w[1].t > w[0].t) {
            return Err(LabError::invalid("flow states must have increasing times"));
        }
    }
    let fields: Vec<TensorField> =
        states.iter().map(|s| compute_curvature(&s.g).map(|b| b.deturck)).collect::<Result<_>>()?;
    let sup_velocity = fields.iter().map(sup_norm).fold(0.0, f64::max);

    let start: Vec<[f64; MAX_DIM]> = (0..grid.len()).map(|i| grid.position(i)).collect();
    let mut pos = start.clone();
    let mut track = DiffeoTrack {
        grid,
        times: vec![first.t],
        displacements: vec![TensorField::zeros(grid, Rank::Vector)],
        max_displacement: vec![0.0],
        sup_velocity,
        truncated_at: None,
    };
    let limit = 0.25 * grid.side();
    let mut k = 0;
    while k + 2 < states.len() {
        let (t0, t1, t2) = (states[k].t, states[k + 1].t, states[k + 2].t);
        let h = t2 - t0;
        if ((t1 - t0) - (t2 - t1)).abs() > 1e-9 * h {
            return Err(LabError::invalid(format!("records {t0}, {t1}, {t2} are not equally spaced")));
        }
        let k1 = velocity_at(&fields[k], &pos, n);
        let k2 = velocity_at(&fields[k + 1], &shifted(&pos, 0.5 * h, &k1), n);
        let k3 = velocity_at(&fields[k + 1], &shifted(&pos, 0.5 * h, &k2), n);
        let k4 = velocity_at(&fields[k + 2], &shifted(&pos, h, &k3), n);
        let next: Vec<[f64; MAX_DIM]> = (0..pos.len())
            .map(|i| {
                let mut p = pos[i];
                for a in 0..n {
                    p[a] += h / 6.0 * (k1[i][a] + 2.0 * k2[i][a] + 2.0 * k3[i][a] + k4[i][a]);
                }
                p
            })
            .collect();
        let mut disp = TensorField::zeros(grid, Rank::Vector);
        for (i, (p, q)) in next.iter().zip(&start).enumerate() {
            for a in 0..n {
                disp.set(i, a, p[a] - q[a]);
            }
        }
        if !disp.is_finite() {
            return Err(LabError::NonFinite(format!("diffeomorphism at t = {t2}")));
        }
        let max = sup_norm(&disp);
        if max >= limit {
            log::warn!("displacement {max:e} reached L/4 at t = {t2}; track truncated");
            track.truncated_at = Some(t2);
            break;
        }
        track.times.push(t2);
        track.displacements.push(disp);
        track.max_displacement.push(max);
        pos = next;
        k += 2;
    }
    Ok(track)
}

/// Smallest Jacobian determinant accepted by [`pullback_metric`].
pub const FOLD_THRESHOLD: f64 = 1e-10;

fn det_n(j: &[[f64; MAX_DIM]; MAX_DIM], n: usize) -> f64 {
    if n == 2 {
        j[0][0] * j[1][1] - j[0][1] * j[1][0]
    } else {
        j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
            + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0])
    }
}

/// `(Φ_t^* g)_ij(x) = ∂_iΦ^a ∂_jΦ^b g_ab(Φ(x))` for sample `k` of the track.
pub fn pullback_metric(track: &DiffeoTrack, k: usize, g: &MetricField) -> Result<MetricField> {
    let grid = *track.grid();
    g.grid().check_same(&grid)?;
    let disp = track.displacements.get(k).ok_or_else(|| LabError::invalid(format!("track has no sample {k}")))?;
    let n = grid.dim();
    // jac[i] holds ∂_i of the displacement, so ∂_iΦ^a = δ_i^a + jac[i]^a
    let jac: Vec<TensorField> = (0..n).map(|i| partial_derivative(disp, i, 1)).collect::<Result<_>>()?;
    let vals = resample(g.tensor(), &track.positions(k));
    let nc = Rank::SymCov2.components(n);
    let data: Vec<[f64; 6]> = (0..grid.len())
        .into_par_iter()
        .map(|node| {
            let mut j = [[0.0; MAX_DIM]; MAX_DIM];
            for i in 0..n {
                for a in 0..n {
                    j[i][a] = if i == a { 1.0 } else { 0.0 } + jac[i].get(node, a);
                }
            }
            let det = det_n(&j, n);
            if !(det > FOLD_THRESHOLD) {
                return Err(LabError::Fold { node, det });
            }
            let gv = &vals[node * nc..(node + 1) * nc];
            let mut out = [0.0; 6];
            for i in 0..n {
                for jj in i..n {
                    let mut acc = 0.0;
                    for a in 0..n {
                        for b in 0..n {
                            acc += j[i][a] * j[jj][b] * gv[sym_index(n, a, b)];
                        }
                    }
                    out[sym_index(n, i, jj)] = acc;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut pulled = TensorField::zeros(grid, Rank::SymCov2);
    for (node, v) in data.iter().enumerate() {
        for (c, x) in v.iter().take(nc).enumerate() {
            pulled.set(node, c, *x);
        }
    }
    MetricField::new(pulled)
}

/// Residuals of the Ricci flow and of the scalar curvature evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub t: f64,
    /// Centred time step of the three samples.
    pub dt: f64,
    /// `sup |(g̃_{t+dt} - g̃_{t-dt}) / 2dt + 2 Ric(g̃_t)|`.
    pub metric: f64,
    /// `sup |(R̃_{t+dt} - R̃_{t-dt}) / 2dt - ΔR̃_t - 2|Ric̃_t|²|`.
    pub scalar: f64,
}

/// `Δ_g f = g^ij (∂_i∂_j f - Γ^k_ij ∂_k f)`.
fn laplacian(f: &TensorField, g: &MetricField, b: &CurvatureBundle) -> Result<TensorField> {
    let grid = *f.grid();
    let n = grid.dim();
    let d1: Vec<TensorField> = (0..n).map(|a| partial_derivative(f, a, 1)).collect::<Result<_>>()?;
    let mut d2 = Vec::new();
    for i in 0..n {
        for j in i..n {
            d2.push(if i == j { partial_derivative(f, i, 2)? } else { partial_derivative(&d1[i], j, 1)? });
        }
    }
    let ginv = g.inverse();
    let data = (0..grid.len())
        .map(|node| {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let mut hess = d2[sym_index(n, i, j)].get(node, 0);
                    for k in 0..n {
                        hess -= b.christoffel_at(node, k, i, j) * d1[k].get(node, 0);
                    }
                    acc += ginv.get(node, sym_index(n, i, j)) * hess;
                }
            }
            acc
        })
        .collect();
    TensorField::from_data(grid, Rank::Scalar, data)
}

/// Ricci flow residuals of the pulled-back flow at track sample `k`, using
/// samples `k - 1, k, k + 1`.
///
/// `metric_at(t)` supplies the DeTurck flow metric at each sample time.
pub fn ricci_flow_residual<'a>(
    track: &DiffeoTrack,
    k: usize,
    metric_at: impl Fn(f64) -> Option<&'a MetricField>,
) -> Result<Residual> {
    if k == 0 || k + 1 >= track.len() {
        return Err(LabError::invalid(format!("sample {k} has no neighbours on both sides")));
    }
    let (t0, t1, t2) = (track.times[k - 1], track.times[k], track.times[k + 1]);
    if ((t1 - t0) - (t2 - t1)).abs() > 1e-9 * (t2 - t0) {
        return Err(LabError::invalid("residual samples must be equally spaced"));
    }
    let dt = t1 - t0;
    let pull = |i: usize, t: f64| {
        let g = metric_at(t).ok_or_else(|| LabError::invalid(format!("no flow state at t = {t}")))?;
        pullback_metric(track, i, g)
    };
    let (g0, g1, g2) = (pull(k - 1, t0)?, pull(k, t1)?, pull(k + 1, t2)?);
    let (b0, b1, b2) = (compute_curvature(&g0)?, compute_curvature(&g1)?, compute_curvature(&g2)?);

    let mut rf = g2.tensor().sub(g0.tensor())?.scale(0.5 / dt);
    rf.add_scaled(2.0, &b1.ricci)?;

    let lap = laplacian(&b1.scalar, &g1, &b1)?;
    let mut sc = b2.scalar.sub(&b0.scalar)?.scale(0.5 / dt);
    sc.add_scaled(-1.0, &lap)?;
    sc.add_scaled(-2.0, &b1.ric_norm_sq)?;
    Ok(Residual { t: t1, dt, metric: sup_norm(&rf), scalar: sup_norm(&sc) })
}
