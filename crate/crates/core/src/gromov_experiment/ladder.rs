use crate::curvature::compute_curvature;
use crate::deturck_flow::{evolve, FlowConfig, Trajectory};
use crate::error::{LabError, Result};
use crate::grid_tensor::{ball_infimum, MetricField};
use crate::heat_kernel::{conjugate_kernel_series, fit_gaussian_bound, Background, GaussianFit, MIN_KERNEL_TIME};

use super::constants::{derive_constants, LadderConstants};

/// Parameters shared by the ladder and the end-to-end verification.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderSettings {
    pub theta: f64,
    pub delta: f64,
    /// Bilipschitz allowance of the initial data.
    pub epsilon: f64,
    pub cfl_fraction: f64,
    /// Top of the time window; rungs with `t_k` above it are not computed.
    pub t_max: f64,
    /// Rungs need `t_k ≥ resolution_factor · dx²`.
    pub resolution_factor: f64,
    /// Conjugate-kernel snapshots used for the Gaussian fit.
    pub fit_samples: usize,
    /// Safety factor applied to the measured curvature decay constant.
    pub c3_safety: f64,
    /// Equally spaced records of the background (besides the rung times).
    pub background_records: usize,
    /// Allowed negative slack, relative to `1 + |a_k|`.
    pub slack_tolerance: f64,
}

impl Default for LadderSettings {
    fn default() -> Self {
        Self {
            theta: 0.19,
            delta: 0.1,
            epsilon: 0.1,
            cfl_fraction: 0.2,
            t_max: 0.3,
            resolution_factor: 20.0,
            fit_samples: 10,
            c3_safety: 1.5,
            background_records: 30,
            slack_tolerance: 1e-3,
        }
    }
}

impl LadderSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 0.5) {
            return Err(LabError::invalid(format!("theta = {} must lie in (0, 1/2)", self.theta)));
        }
        if !(self.delta > 0.0) {
            return Err(LabError::invalid("delta must be positive"));
        }
        if !(self.t_max > 0.0 && self.t_max < 1.0) {
            return Err(LabError::invalid(format!("t_max = {} must lie in (0, 1)", self.t_max)));
        }
        if self.fit_samples < 10 {
            return Err(LabError::invalid("the Gaussian fit needs at least 10 samples"));
        }
        if !(self.c3_safety >= 1.0) {
            return Err(LabError::invalid("the C3 safety factor must be at least 1"));
        }
        if !(self.resolution_factor > 0.0) || self.background_records == 0 {
            return Err(LabError::invalid("resolution factor and record count must be positive"));
        }
        Ok(())
    }

    fn t(&self, k: usize) -> f64 {
        (1.0 - self.theta).powi(k as i32)
    }

    /// Rung indices inside the time window and above the resolution floor.
    pub fn rungs(&self, dx: f64) -> std::ops::RangeInclusive<usize> {
        let floor = self.resolution_factor * dx * dx;
        let mut first = 0;
        while self.t(first) > self.t_max * (1.0 + 1e-12) {
            first += 1;
        }
        let mut last = first;
        while self.t(last + 1) >= floor {
            last += 1;
        }
        first..=last
    }

    /// Flow configuration recording the background and every rung time.
    pub fn flow_config(&self, dx: f64) -> Result<FlowConfig> {
        self.validate()?;
        let rungs = self.rungs(dx);
        if self.t(*rungs.start()) < self.resolution_factor * dx * dx {
            return Err(LabError::Resolution(format!(
                "no rung lies between {:e} and t_max = {}",
                self.resolution_factor * dx * dx,
                self.t_max
            )));
        }
        let top = self.t(*rungs.start());
        let mut times: Vec<f64> = rungs.map(|k| self.t(k)).collect();
        times.extend((1..=self.background_records).map(|j| top * j as f64 / self.background_records as f64));
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
        Ok(FlowConfig {
            cfl_fraction: self.cfl_fraction,
            t_end: top,
            epsilon: self.epsilon,
            record_times: times,
            ..FlowConfig::default()
        })
    }
}

/// Gaussian fit and `C₃` measured on a trajectory.
#[derive(Debug, Clone)]
pub struct Calibration {
    pub fit: GaussianFit,
    /// Measured curvature decay constant times the safety factor.
    pub c3: f64,
}

/// Fits the conjugate kernel at the origin over `t - s` from `10 dx²` to
/// `40 dx²`, ending at the last record, and measures `C₃`.
pub fn calibrate(traj: &Trajectory, settings: &LadderSettings) -> Result<Calibration> {
    let bg = Background::from_trajectory(traj, true)?;
    let grid = *bg.grid();
    let t = bg.span().1;
    let tau_min = MIN_KERNEL_TIME * grid.dx().powi(2);
    if 4.0 * tau_min > t {
        return Err(LabError::Resolution(format!("the background ends at {t}, before 40 dx² = {:e}", 4.0 * tau_min)));
    }
    let n = settings.fit_samples;
    let sources: Vec<f64> =
        (0..n).map(|j| t - tau_min * 4f64.powf(j as f64 / (n - 1) as f64)).map(|s| s.max(0.0)).collect();
    let samples = conjugate_kernel_series(&bg, grid.origin_node(), t, &sources)?;
    let fit = fit_gaussian_bound(&samples, &bg)?;
    let c3 =
        traj.curvature_decay_constant().ok_or_else(|| LabError::invalid("trajectory has no positive record times"))?
            * settings.c3_safety;
    // a flat flow has C₃ = 0; any positive constant then serves
    let c3 = if c3 > 0.0 { c3 } else { f64::MIN_POSITIVE.sqrt() };
    Ok(Calibration { fit, c3 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderRow {
    pub k: usize,
    pub t: f64,
    pub r: f64,
    /// `inf_{B(o, r_k)} R(·, t_k)`.
    pub a: f64,
    /// `R(o, t_k)`.
    pub origin: f64,
    /// `a_k - a_{k+1} + loss(k)`, when rung `k + 1` was computed.
    pub slack: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderVerdict {
    /// Whether `R(o, t_k) > a - δ` at every computed `k ≥ N`; `None` when no
    /// computed rung reaches `N`.
    pub from_n: Option<bool>,
    /// Whether `R(o, t_k) > a - δ` at every computed rung.
    pub all_rungs: bool,
    /// Whether every slack is at least `-tol (1 + |a_k|)`.
    pub slack_ok: bool,
    pub min_origin: f64,
}

impl LadderVerdict {
    pub fn passed(&self) -> bool {
        self.from_n.unwrap_or(true) && self.all_rungs && self.slack_ok
    }

    pub fn is_vacuous(&self) -> bool {
        self.from_n.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderReport {
    pub a: f64,
    pub constants: LadderConstants,
    pub rows: Vec<LadderRow>,
    /// Rungs past the last computed one up to `N`, not resolvable on the grid.
    pub unresolved: Option<(usize, usize)>,
    /// Smallest `min_x R` over all recorded times.
    pub min_recorded_r: f64,
    pub verdict: LadderVerdict,
}

/// Evaluates the ladder on a recorded flow: `a_k`, `R(o, t_k)` and the
/// recursion slacks for every rung in the window.
pub fn ladder_on_trajectory(
    traj: &Trajectory,
    a: f64,
    consts: &LadderConstants,
    settings: &LadderSettings,
) -> Result<LadderReport> {
    let g0 = &traj.states[0].g;
    let grid = *g0.grid();
    let o = grid.origin_node();
    let r0 = compute_curvature(g0)?.scalar;
    let inf0 = ball_infimum(&r0, o, 1.0)?;
    if !(inf0 > a) {
        return Err(LabError::invalid(format!("R(g_0) reaches {inf0} <= a = {a} on B(o, 1)")));
    }
    let mut rows: Vec<LadderRow> = Vec::new();
    for k in settings.rungs(grid.dx()) {
        let t = consts.t(k);
        let state = traj.state_at(t).ok_or_else(|| LabError::invalid(format!("flow has no record at t_{k} = {t}")))?;
        let scalar = compute_curvature(&state.g)?.scalar;
        let r = consts.r(k);
        let ak = if r < 0.5 * grid.dx() { scalar.get(o, 0) } else { ball_infimum(&scalar, o, r)? };
        rows.push(LadderRow { k, t, r, a: ak, origin: scalar.get(o, 0), slack: None });
    }
    for j in 0..rows.len().saturating_sub(1) {
        let (k, next) = (rows[j].k, rows[j + 1].a);
        rows[j].slack = Some(rows[j].a - next + consts.loss(k));
    }
    let last = rows.last().map(|r| r.k).unwrap_or(0);
    let unresolved = (last < consts.n).then_some((last + 1, consts.n));
    let bar = a - consts.delta;
    let from_n: Vec<bool> = rows.iter().filter(|r| r.k >= consts.n).map(|r| r.origin > bar).collect();
    let verdict = LadderVerdict {
        from_n: (!from_n.is_empty()).then(|| from_n.iter().all(|&ok| ok)),
        all_rungs: rows.iter().all(|r| r.origin > bar),
        slack_ok: rows.iter().all(|r| r.slack.is_none_or(|s| s >= -settings.slack_tolerance * (1.0 + r.a.abs()))),
        min_origin: rows.iter().map(|r| r.origin).fold(f64::INFINITY, f64::min),
    };
    let min_recorded_r = traj.states.iter().map(|s| s.diagnostics.min_r).fold(f64::INFINITY, f64::min);
    Ok(LadderReport { a, constants: consts.clone(), rows, unresolved, min_recorded_r, verdict })
}

/// Evolves `g_0` over the ladder window and evaluates the ladder with the
/// given constants.
pub fn run_ladder(
    g0: &MetricField,
    a: f64,
    consts: &LadderConstants,
    settings: &LadderSettings,
) -> Result<LadderReport> {
    let traj = evolve(g0, &settings.flow_config(g0.grid().dx())?)?;
    check_complete(&traj)?;
    ladder_on_trajectory(&traj, a, consts, settings)
}

pub(crate) fn check_complete(traj: &Trajectory) -> Result<()> {
    match &traj.failure {
        None => Ok(()),
        Some(f) => Err(LabError::Diagnostic(format!("flow stopped early: {f:?}"))),
    }
}

/// Evolves `g_0`, calibrates the constants on the flow and evaluates the ladder.
pub fn ladder_experiment(g0: &MetricField, a: f64, settings: &LadderSettings) -> Result<(Trajectory, LadderReport)> {
    let traj = evolve(g0, &settings.flow_config(g0.grid().dx())?)?;
    check_complete(&traj)?;
    let cal = calibrate(&traj, settings)?;
    let consts = derive_constants(settings.theta, &cal.fit, cal.c3, settings.delta, None)?;
    let report = ladder_on_trajectory(&traj, a, &consts, settings)?;
    Ok((traj, report))
}
