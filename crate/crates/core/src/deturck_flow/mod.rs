//! Ricci DeTurck flow `∂_t g = -2 Ric(g) - L_{X(g)} g` relative to the flat
//! background, advanced with a four-stage explicit scheme under a parabolic
//! step restriction, together with the smoothing and stability diagnostics.

mod harness;
mod rhs;

pub use harness::{continuous_dependence_harness, lockstep_difference};
pub use rhs::{rhs, rhs_h_form};

use log::{debug, warn};

use crate::curvature::{compute_curvature, deturck_velocity_with_scalar};
use crate::error::{LabError, Result};
use crate::grid_tensor::{sup_derivative_norm, sup_norm, MetricField, TensorField};

/// Bilipschitz constant the flow must stay below.
pub const BILIPSCHITZ_LIMIT: f64 = 1.1;

/// Bilipschitz constant at which a run is considered blown up and halted.
pub const BLOWUP_LIMIT: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    /// Fraction of the parabolic step limit actually used.
    pub cfl_fraction: f64,
    pub t_end: f64,
    /// Initial data must be `(1 + epsilon)`-bilipschitz to `g_eucl`.
    pub epsilon: f64,
    /// Times at which full states are kept (besides `t = 0`).
    pub record_times: Vec<f64>,
    /// Derivative orders `m` for the `sup |∂^m g|` diagnostics.
    pub diagnostic_orders: Vec<usize>,
    /// Fixed step instead of the adaptive parabolic one; still CFL-checked.
    pub fixed_dt: Option<f64>,
    /// Reject initial data whose perturbation leaves the middle half of the box.
    pub require_local_support: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            cfl_fraction: 0.2,
            t_end: 0.1,
            epsilon: 0.1,
            record_times: vec![0.1],
            diagnostic_orders: vec![1, 2, 3],
            fixed_dt: None,
            require_local_support: true,
        }
    }
}

impl FlowConfig {
    /// Config recording `count` equally spaced times up to `t_end`.
    pub fn uniform(t_end: f64, count: usize) -> Self {
        let record_times = (1..=count).map(|k| t_end * k as f64 / count as f64).collect();
        Self { t_end, record_times, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_fraction > 0.0 && self.cfl_fraction <= 0.5) {
            return Err(LabError::invalid(format!("cfl_fraction {} not in (0, 0.5]", self.cfl_fraction)));
        }
        if !(self.t_end > 0.0 && self.t_end < 1.0) {
            return Err(LabError::invalid(format!("t_end {} not in (0, 1)", self.t_end)));
        }
        if !(self.epsilon > 0.0) {
            return Err(LabError::invalid("epsilon must be positive"));
        }
        if let Some(dt) = self.fixed_dt {
            if !(dt > 0.0) {
                return Err(LabError::invalid("fixed dt must be positive"));
            }
        }
        for &t in &self.record_times {
            if !(t > 0.0 && t <= self.t_end) {
                return Err(LabError::invalid(format!("record time {t} outside (0, t_end]")));
            }
        }
        if let Some(&m) = self.diagnostic_orders.iter().find(|&&m| m == 0 || m > 4) {
            return Err(LabError::invalid(format!("diagnostic order {m} not in 1..=4")));
        }
        Ok(())
    }

    fn sorted_records(&self) -> Vec<f64> {
        let mut r = self.record_times.clone();
        r.sort_by(f64::total_cmp);
        r.dedup();
        if r.last().is_none_or(|&t| t < self.t_end) {
            r.push(self.t_end);
        }
        r
    }
}

/// Diagnostics of one recorded metric.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub bilipschitz: f64,
    pub sup_h: f64,
    /// `(m, sup |∂^m g|)` for each tracked order.
    pub sup_dg: Vec<(usize, f64)>,
    pub min_r: f64,
    pub max_r: f64,
    pub max_rm: f64,
}

impl Diagnostics {
    pub fn measure(g: &MetricField, orders: &[usize]) -> Result<Self> {
        let b = compute_curvature(g)?;
        let (min_r, max_r) = b.scalar.min_max();
        let sup_dg =
            orders.iter().map(|&m| sup_derivative_norm(g.tensor(), m).map(|v| (m, v))).collect::<Result<_>>()?;
        Ok(Self {
            bilipschitz: g.bilipschitz(),
            sup_h: sup_norm(&g.perturbation()),
            sup_dg,
            min_r,
            max_r,
            max_rm: b.rm_norm.min_max().1,
        })
    }

    pub fn sup_dg(&self, m: usize) -> Option<f64> {
        self.sup_dg.iter().find(|(k, _)| *k == m).map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub g: MetricField,
    pub diagnostics: Diagnostics,
}

/// `min_x R` at the start of one accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    pub min_r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FlowFailure {
    Degenerate { t: f64, message: String },
    NonFinite { t: f64 },
    Blowup { t: f64, bilipschitz: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// States at `t = 0` and at every reached record time.
    pub states: Vec<FlowState>,
    pub steps: Vec<StepRecord>,
    /// First record time at which the bilipschitz constant reached the limit.
    pub bilipschitz_violation: Option<f64>,
    /// Set when the run stopped early; `states` then holds the partial run.
    pub failure: Option<FlowFailure>,
}

impl Trajectory {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    pub fn final_state(&self) -> &FlowState {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn state_at(&self, t: f64) -> Option<&FlowState> {
        self.states.iter().find(|s| (s.t - t).abs() <= 1e-12 * (1.0 + t))
    }

    /// `max_t t^{m/2} sup |∂^m g_t|` over recorded `t > 0`.
    pub fn smoothing_constant(&self, m: usize) -> Option<f64> {
        self.states
            .iter()
            .filter(|s| s.t > 0.0)
            .filter_map(|s| s.diagnostics.sup_dg(m).map(|v| v * s.t.powf(m as f64 / 2.0)))
            .reduce(f64::max)
    }

    /// `max_t t · max |Rm|(·, t)` over recorded `t > 0`.
    pub fn curvature_decay_constant(&self) -> Option<f64> {
        self.states
            .iter()
            .filter(|s| s.t > 0.0)
            .map(|s| s.t * s.diagnostics.max_rm.max(s.diagnostics.max_r.abs()).max(s.diagnostics.min_r.abs()))
            .reduce(f64::max)
    }
}

/// Largest stable step for the current metric.
pub fn stable_dt(g: &MetricField, cfl_fraction: f64) -> f64 {
    let n = g.grid().dim() as f64;
    cfl_fraction * g.grid().dx().powi(2) / (2.0 * n * g.max_inverse_eigenvalue())
}

/// One classical Runge-Kutta step of the metric, returning the new metric
/// and `min R` of the input metric.
pub(crate) fn rk4(g: &MetricField, dt: f64) -> Result<(MetricField, f64)> {
    let (k1, r) = deturck_velocity_with_scalar(g)?;
    let stage = |k: &TensorField, a: f64| MetricField::new(g.tensor().axpy(a, k)?);
    let k2 = deturck_velocity_with_scalar(&stage(&k1, 0.5 * dt)?)?.0;
    let k3 = deturck_velocity_with_scalar(&stage(&k2, 0.5 * dt)?)?.0;
    let k4 = deturck_velocity_with_scalar(&stage(&k3, dt)?)?.0;
    let mut next = g.tensor().clone();
    next.add_scaled(dt / 6.0, &k1)?;
    next.add_scaled(dt / 3.0, &k2)?;
    next.add_scaled(dt / 3.0, &k3)?;
    next.add_scaled(dt / 6.0, &k4)?;
    next.check_finite("metric after step")?;
    Ok((MetricField::new(next)?, r.min_max().0))
}

/// Advances a state by `dt`, checking the parabolic step restriction.
pub fn step(state: &FlowState, dt: f64, cfg: &FlowConfig) -> Result<FlowState> {
    let limit = stable_dt(&state.g, cfg.cfl_fraction);
    if dt > limit * (1.0 + 1e-12) {
        return Err(LabError::Cfl { dt, limit });
    }
    let (g, _) = rk4(&state.g, dt)?;
    let diagnostics = Diagnostics::measure(&g, &cfg.diagnostic_orders)?;
    Ok(FlowState { t: state.t + dt, g, diagnostics })
}

/// Checks the admissibility of initial data for [`evolve`].
pub fn check_initial(g0: &MetricField, cfg: &FlowConfig) -> Result<()> {
    let lambda = g0.bilipschitz();
    if lambda > 1.0 + cfg.epsilon {
        return Err(LabError::invalid(format!(
            "initial metric is {lambda}-bilipschitz, more than 1 + epsilon = {}",
            1.0 + cfg.epsilon
        )));
    }
    if cfg.require_local_support {
        let grid = g0.grid();
        let h = g0.perturbation();
        let scale = sup_norm(&h).max(f64::MIN_POSITIVE);
        if let Some(node) = (0..grid.len()).find(|&i| !grid.in_middle_half(i) && h.pointwise_norm(i) > 1e-12 * scale) {
            return Err(LabError::invalid(format!(
                "perturbation is not supported in the middle half of the box (node {node})"
            )));
        }
    }
    Ok(())
}

/// Evolves `g0` to `cfg.t_end`, keeping states at the record times.
///
/// Degenerate metrics, non-finite values and bilipschitz blow-up stop the run
/// and return the partial trajectory with a failure marker.
pub fn evolve(g0: &MetricField, cfg: &FlowConfig) -> Result<Trajectory> {
    cfg.validate()?;
    check_initial(g0, cfg)?;
    let mut traj = Trajectory {
        states: vec![FlowState {
            t: 0.0,
            g: g0.clone(),
            diagnostics: Diagnostics::measure(g0, &cfg.diagnostic_orders)?,
        }],
        steps: Vec::new(),
        bilipschitz_violation: None,
        failure: None,
    };
    let mut g = g0.clone();
    let mut t = 0.0;
    for target in cfg.sorted_records() {
        while target - t > 1e-14 * (1.0 + target) {
            let limit = stable_dt(&g, cfg.cfl_fraction);
            let dt_nominal = match cfg.fixed_dt {
                Some(dt) if dt > limit * (1.0 + 1e-12) => return Err(LabError::Cfl { dt, limit }),
                Some(dt) => dt,
                None => limit,
            };
            let remaining = target - t;
            let count = (remaining / dt_nominal - 1e-9).ceil().max(1.0);
            let dt = remaining / count;
            let (next, min_r) = match rk4(&g, dt) {
                Ok(v) => v,
                Err(e) => {
                    warn!("flow halted at t = {t}: {e}");
                    traj.failure = Some(match e {
                        LabError::NonFinite(_) => FlowFailure::NonFinite { t },
                        other => FlowFailure::Degenerate { t, message: other.to_string() },
                    });
                    return Ok(traj);
                }
            };
            traj.steps.push(StepRecord { t, dt, min_r });
            g = next;
            // land exactly on the record time
            t = if count <= 1.0 { target } else { t + dt };
            let lambda = g.bilipschitz();
            if lambda >= BLOWUP_LIMIT {
                traj.failure = Some(FlowFailure::Blowup { t, bilipschitz: lambda });
                return Ok(traj);
            }
        }
        let diagnostics = Diagnostics::measure(&g, &cfg.diagnostic_orders)?;
        if diagnostics.bilipschitz >= BILIPSCHITZ_LIMIT && traj.bilipschitz_violation.is_none() {
            warn!("bilipschitz constant {} at t = {target}", diagnostics.bilipschitz);
            traj.bilipschitz_violation = Some(target);
        }
        debug!("t = {target:.6}: minR = {:.6e}, sup h = {:.3e}", diagnostics.min_r, diagnostics.sup_h);
        traj.states.push(FlowState { t: target, g: g.clone(), diagnostics });
    }
    Ok(traj)
}
