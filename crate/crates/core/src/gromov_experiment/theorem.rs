use std::fmt;

use rayon::prelude::*;

use crate::curvature::compute_curvature;
use crate::deturck_flow::{evolve, Trajectory};
use crate::error::{LabError, Result};
use crate::grid_tensor::{ball_infimum, sup_norm};

use super::constants::derive_constants;
use super::family::MetricFamily;
use super::ladder::{calibrate, check_complete, ladder_on_trajectory, LadderReport, LadderSettings};

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremSettings {
    pub ladder: LadderSettings,
    /// Largest allowed `sup_t |g_{i,t} - g_t| / |g_i - g|`.
    pub lipschitz_bound: f64,
    /// Allowed gap between the extrapolated and the direct `R(g_0, o)`,
    /// relative to `1 + |R|`.
    pub extrapolation_tolerance: f64,
}

impl Default for TheoremSettings {
    fn default() -> Self {
        Self { ladder: LadderSettings::default(), lipschitz_bound: 10.0, extrapolation_tolerance: 0.25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    /// Members' flows converge to the limit flow.
    Convergence,
    /// Each member flow keeps `R(o, t) > κ'' - δ` on the ladder.
    MemberLadder,
    /// The limit flow inherits the bound at the origin.
    LimitFlow,
    /// Letting `t → 0` recovers the bound for the limit metric.
    Extrapolation,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Convergence => "convergence",
            Stage::MemberLadder => "member-ladder",
            Stage::LimitFlow => "limit-flow",
            Stage::Extrapolation => "extrapolation",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Stage::Convergence => "i",
            Stage::MemberLadder => "ii",
            Stage::LimitFlow => "iii",
            Stage::Extrapolation => "iv",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageResult {
    pub stage: Stage,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct TheoremVerdict {
    pub stages: Vec<StageResult>,
    /// `(|g_i - g|, sup_t |g_{i,t} - g_t|)` per member.
    pub distances: Vec<(f64, f64)>,
    pub convergence_order: f64,
    pub member_ladders: Vec<LadderReport>,
    /// `(t_k, R(g_{t_k}, o))` on the limit flow.
    pub limit_origin: Vec<(f64, f64)>,
    pub extrapolated: f64,
    pub direct: f64,
}

impl TheoremVerdict {
    pub fn failed_stage(&self) -> Option<Stage> {
        self.stages.iter().find(|s| !s.passed).map(|s| s.stage)
    }

    pub fn passed(&self) -> bool {
        self.failed_stage().is_none()
    }
}

impl fmt::Display for TheoremVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.failed_stage() {
            None => write!(f, "PASS"),
            Some(s) => write!(f, "FAIL({})", s.label()),
        }
    }
}

fn list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Least-squares slope of `-ln d` against `ln i`.
fn decay_order(d: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = d.iter().enumerate().map(|(k, v)| (((k + 1) as f64).ln(), -v.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Quadratic through three points, evaluated at 0.
fn extrapolate_to_zero(p: &[(f64, f64)]) -> f64 {
    let mut acc = 0.0;
    for (a, &(ta, ya)) in p.iter().enumerate() {
        let w: f64 = p.iter().enumerate().filter(|(b, _)| *b != a).map(|(_, &(tb, _))| tb / (tb - ta)).product();
        acc += w * ya;
    }
    acc
}

fn origin_scalar(traj: &Trajectory, t: f64) -> Result<f64> {
    let state = traj.state_at(t).ok_or_else(|| LabError::invalid(format!("flow has no record at t = {t}")))?;
    let o = state.g.grid().origin_node();
    Ok(compute_curvature(&state.g)?.scalar.get(o, 0))
}

/// Checks the four-stage argument that a `C⁰` limit of metrics with
/// `R ≥ κ''` on `B(o, 1)` has `R(o) ≥ κ'' - δ > κ'`.
///
/// Every stage is evaluated; the verdict is the first failing one.
pub fn verify_theorem(
    family: &MetricFamily,
    kappa_lo: f64,
    kappa_hi: f64,
    settings: &TheoremSettings,
) -> Result<TheoremVerdict> {
    let ls = &settings.ladder;
    ls.validate()?;
    if !(kappa_lo < kappa_hi) {
        return Err(LabError::invalid(format!("need kappa' = {kappa_lo} < kappa'' = {kappa_hi}")));
    }
    if !(kappa_hi - ls.delta > kappa_lo) {
        return Err(LabError::invalid(format!(
            "delta = {} must be below kappa'' - kappa' = {}",
            ls.delta,
            kappa_hi - kappa_lo
        )));
    }
    if family.members.len() < 3 {
        return Err(LabError::invalid("the family needs at least 3 members"));
    }
    let grid = *family.limit.grid();
    let o = grid.origin_node();
    for m in &family.members {
        let inf = ball_infimum(&compute_curvature(&m.metric)?.scalar, o, 1.0)?;
        if !(inf > kappa_hi) {
            return Err(LabError::invalid(format!(
                "member {} has R = {inf} <= kappa'' = {kappa_hi} on B(o, 1)",
                m.index
            )));
        }
    }

    let cfg = ls.flow_config(grid.dx())?;
    let mut metrics: Vec<_> = family.members.iter().map(|m| &m.metric).collect();
    metrics.push(&family.limit);
    let mut trajs = metrics
        .par_iter()
        .map(|g| {
            let traj = evolve(g, &cfg)?;
            check_complete(&traj)?;
            Ok(traj)
        })
        .collect::<Result<Vec<_>>>()?;
    let limit = trajs.pop().expect("limit flow");
    let mut stages = Vec::new();

    // (i) convergence of the flows
    let distances = trajs
        .iter()
        .zip(&family.members)
        .map(|(traj, m)| {
            let d0 = sup_norm(&m.metric.tensor().sub(family.limit.tensor())?);
            let mut dt: f64 = 0.0;
            for (a, b) in traj.states.iter().zip(&limit.states) {
                dt = dt.max(sup_norm(&a.g.tensor().sub(b.g.tensor())?));
            }
            Ok((d0, dt))
        })
        .collect::<Result<Vec<_>>>()?;
    let d0: Vec<f64> = distances.iter().map(|d| d.0).collect();
    let decreasing = d0.windows(2).all(|w| w[1] < w[0]) && d0.iter().all(|&d| d > 0.0);
    let order = if d0.iter().all(|&d| d > 0.0) { decay_order(&d0) } else { f64::NAN };
    let worst_ratio = distances.iter().map(|&(a, b)| b / a).fold(0.0, f64::max);
    // the declared limit must be at least as close to the last member as the
    // first member is, at t = 0 and along the flows
    let (first, last) = (&trajs[0], &trajs[trajs.len() - 1]);
    let mut spread: f64 = 0.0;
    for (a, b) in first.states.iter().zip(&last.states) {
        spread = spread.max(sup_norm(&a.g.tensor().sub(b.g.tensor())?));
    }
    let spread0 = sup_norm(&first.states[0].g.tensor().sub(last.states[0].g.tensor())?);
    let (tail0, tail) = distances[distances.len() - 1];
    let consistent = tail0 <= spread0 && tail <= spread;
    stages.push(StageResult {
        stage: Stage::Convergence,
        passed: decreasing && consistent && worst_ratio <= settings.lipschitz_bound,
        detail: format!(
            "|g_i - g| = {}, decreasing: {decreasing}, decay order {order:.3}; last member to limit {tail0:.3e} \
             (flows {tail:.3e}) vs to first member {spread0:.3e} (flows {spread:.3e}); worst flow ratio {worst_ratio:.3} (bound {})",
            list(&d0),
            settings.lipschitz_bound
        ),
    });

    // (ii) ladder on each member
    let member_ladders = trajs
        .par_iter()
        .map(|traj| {
            let cal = calibrate(traj, ls)?;
            let consts = derive_constants(ls.theta, &cal.fit, cal.c3, ls.delta, None)?;
            ladder_on_trajectory(traj, kappa_hi, &consts, ls)
        })
        .collect::<Result<Vec<_>>>()?;
    let failing: Vec<usize> =
        member_ladders.iter().zip(&family.members).filter(|(r, _)| !r.verdict.passed()).map(|(_, m)| m.index).collect();
    let min_origin = member_ladders.iter().map(|r| r.verdict.min_origin).fold(f64::INFINITY, f64::min);
    let vacuous = member_ladders.iter().filter(|r| r.verdict.is_vacuous()).count();
    stages.push(StageResult {
        stage: Stage::MemberLadder,
        passed: failing.is_empty(),
        detail: format!(
            "min R(o, t_k) over members {min_origin:.4} vs kappa'' - delta = {:.4}; failing members {failing:?}; \
             {vacuous} of {} ladders have N beyond the resolved rungs",
            kappa_hi - ls.delta,
            member_ladders.len()
        ),
    });

    // (iii) limit flow at the origin
    let rows = &member_ladders[0].rows;
    let limit_origin = rows.iter().map(|row| Ok((row.t, origin_scalar(&limit, row.t)?))).collect::<Result<Vec<_>>>()?;
    let gaps: Vec<f64> = member_ladders
        .iter()
        .map(|r| r.rows.iter().zip(&limit_origin).map(|(row, l)| (row.origin - l.1).abs()).fold(0.0, f64::max))
        .collect();
    let gaps_shrink = gaps.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-12);
    let limit_min = limit_origin.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    stages.push(StageResult {
        stage: Stage::LimitFlow,
        passed: gaps_shrink && limit_min >= kappa_hi - ls.delta,
        detail: format!(
            "min R(o, t_k) on the limit flow {limit_min:.4}; member gaps {}, shrinking: {gaps_shrink}",
            list(&gaps)
        ),
    });

    // (iv) t → 0
    let mut near: Vec<(f64, f64)> = limit_origin.clone();
    near.sort_by(|a, b| a.0.total_cmp(&b.0));
    if near.len() < 3 {
        return Err(LabError::Resolution("fewer than 3 resolved rungs for the extrapolation".into()));
    }
    let extrapolated = extrapolate_to_zero(&near[..3]);
    let direct = compute_curvature(&family.limit)?.scalar.get(o, 0);
    let gap = (extrapolated - direct).abs();
    let tol = settings.extrapolation_tolerance * (1.0 + direct.abs());
    stages.push(StageResult {
        stage: Stage::Extrapolation,
        passed: gap <= tol && extrapolated.min(direct) >= kappa_hi - ls.delta,
        detail: format!(
            "extrapolated R(o) = {extrapolated:.4}, direct {direct:.4} (gap {gap:.3e}, tolerance {tol:.3e}), bound {:.4}",
            kappa_hi - ls.delta
        ),
    });

    Ok(TheoremVerdict {
        stages,
        distances,
        convergence_order: order,
        member_ladders,
        limit_origin,
        extrapolated,
        direct,
    })
}
