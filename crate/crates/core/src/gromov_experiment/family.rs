use std::f64::consts::PI;

use crate::curvature::compute_curvature;
use crate::error::{LabError, Result};
use crate::grid_tensor::{sup_norm, Grid, MetricField, Rank, TensorField};

/// Radii of the flat top and the outer edge of the member bump.
const BUMP_INNER: f64 = 0.4;
const BUMP_OUTER: f64 = 0.95;
/// Period of the spike profile in its own variable.
const SPIKE_PERIOD: f64 = 2.0;
/// Spike width of the first member; each further member is narrower by 0.8.
const SPIKE_WIDTH: f64 = 0.5;
const SPIKE_SHRINK: f64 = 0.8;
/// Plateau of `w''` per unit `|κ|`.
const SPIKE_PLATEAU: f64 = 0.55 / 1.5;
/// Negative-curvature bump glued into the negative-control limit.
const CONTROL_DEPTH: f64 = 0.04;
const CONTROL_WIDTH: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    /// Conformal metrics `e^{2u_i} g_eucl`, `u_i = f^{-2} w(f x¹) · bump` with
    /// `f = i + 1` and ever narrower spikes in `w''`: second derivatives grow
    /// while the members converge uniformly to `g_eucl` (dimension 2 only).
    ConformalSpike,
    /// `e^{2u/i} g_eucl` for a fixed small bump `u`; converges in C².
    SmoothConverging,
    /// Spike members glued to `g_eucl` outside `B(o, 1)`.
    Glued,
    /// Spike members paired with a limit carrying an extra negative-curvature
    /// bump, so the members do not converge to it.
    NegativeControl,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::ConformalSpike => "conformal-spike",
            FamilyKind::SmoothConverging => "smooth-c2-converging",
            FamilyKind::Glued => "glued",
            FamilyKind::NegativeControl => "negative-control",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [FamilyKind::ConformalSpike, FamilyKind::SmoothConverging, FamilyKind::Glued, FamilyKind::NegativeControl]
            .into_iter()
            .find(|k| k.name() == name)
    }
}

#[derive(Debug, Clone)]
pub struct FamilyMember {
    pub index: usize,
    pub metric: MetricField,
    /// `sup |g_i - g|` against the family's limit.
    pub distance_to_limit: f64,
    /// Smallest scalar curvature over the grid.
    pub min_r: f64,
}

#[derive(Debug, Clone)]
pub struct MetricFamily {
    pub kind: FamilyKind,
    /// Guaranteed lower bound on the scalar curvature of every member.
    pub kappa: f64,
    pub members: Vec<FamilyMember>,
    pub limit: MetricField,
    /// Generator parameters, for the record.
    pub parameters: Vec<(String, f64)>,
}

/// C∞ step: 1 for `r ≤ r0`, 0 for `r ≥ r1`.
pub fn smooth_step(r: f64, r0: f64, r1: f64) -> f64 {
    let f = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let s = ((r - r0) / (r1 - r0)).clamp(0.0, 1.0);
    f(1.0 - s) / (f(1.0 - s) + f(s))
}

fn radius(p: [f64; 3]) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

/// Radial C∞ cutoff: 1 on `B(o, r_in)`, 0 outside `B(o, r_out)`.
pub fn cutoff(grid: Grid, r_in: f64, r_out: f64) -> Result<TensorField> {
    if !(0.0 < r_in && r_in < r_out) {
        return Err(LabError::invalid(format!("cutoff radii {r_in} < {r_out} must be positive and ordered")));
    }
    Ok(TensorField::scalar_from_fn(grid, |p| smooth_step(radius(p), r_in, r_out)))
}

/// Zero-mean periodic profile with `w'' = c` away from Gaussian spikes of
/// width `sigma`, one per period `period`, where `w''` dips to about
/// `c - c·period/(sigma √(2π))`.
pub fn spike_profile(xi: f64, c: f64, period: f64, sigma: f64) -> f64 {
    let mut acc = 0.0;
    for k in 1.. {
        let q = 2.0 * PI * k as f64 / period;
        let damp = (-0.5 * sigma * sigma * q * q).exp();
        if damp < 1e-18 {
            break;
        }
        acc += 2.0 * c * damp * (q * xi).cos() / (q * q);
    }
    acc
}

/// Blends `g` into `g_eucl`: `φ g + (1 - φ) g_eucl`.
///
/// `φ` must lie in `[0, 1]` and equal 1 on `B(o, 1)`. For the result to be a
/// valid flow start `φ` should also vanish outside the middle half; that is
/// left to the flow's own support check.
pub fn glue_to_euclidean(g: &MetricField, phi: &TensorField) -> Result<MetricField> {
    let grid = *g.grid();
    phi.grid().check_same(&grid)?;
    if phi.rank() != Rank::Scalar {
        return Err(LabError::invalid("cutoff must be a scalar field"));
    }
    let o = grid.origin_node();
    for node in 0..grid.len() {
        let v = phi.get(node, 0);
        if !(0.0..=1.0).contains(&v) {
            return Err(LabError::invalid(format!("cutoff value {v} at node {node} is outside [0, 1]")));
        }
        if grid.distance(o, node) <= 1.0 && v != 1.0 {
            return Err(LabError::invalid(format!("cutoff is {v} at node {node} inside B(o, 1)")));
        }
    }
    // φ g + (1 - φ) g_eucl term by term, so φ = 1 and φ = 0 reproduce g and
    // g_eucl bit for bit
    let n = grid.dim();
    let mut blended = g.tensor().clone();
    for i in 0..n {
        for j in i..n {
            let c = crate::grid_tensor::sym_index(n, i, j);
            for (x, w) in blended.component_mut(c).iter_mut().zip(phi.component(0)) {
                *x = if i == j { w * *x + (1.0 - w) } else { w * *x };
            }
        }
    }
    MetricField::new(blended)
}

fn member_check(metric: &MetricField, kappa: f64, epsilon: f64, index: usize) -> Result<f64> {
    let grid = metric.grid();
    let lambda = metric.bilipschitz();
    if lambda > 1.0 + epsilon {
        return Err(LabError::invalid(format!(
            "member {index} is {lambda}-bilipschitz, beyond 1 + epsilon = {}",
            1.0 + epsilon
        )));
    }
    let h = metric.perturbation();
    let sup = sup_norm(&h);
    for node in 0..grid.len() {
        if !grid.in_middle_half(node) && h.pointwise_norm(node) > 1e-12 * sup {
            return Err(LabError::invalid(format!("member {index} is not supported in the middle half")));
        }
    }
    let min_r = compute_curvature(metric)?.scalar.min_max().0;
    let tol = 1e-3 * (1.0 + kappa.abs());
    if min_r < kappa - tol {
        return Err(LabError::Diagnostic(format!("member {index} has min R = {min_r}, below kappa = {kappa}")));
    }
    Ok(min_r)
}

fn sup_distance(a: &MetricField, b: &MetricField) -> Result<f64> {
    Ok(sup_norm(&a.tensor().sub(b.tensor())?))
}

/// Builds `count` members of a family with `R ≥ κ`, each checked on
/// construction: `(1+ε)`-bilipschitz, supported in the middle half, and
/// `min R ≥ κ - 1e-3 (1 + |κ|)` as computed on the grid.
///
/// Members are indexed `i = 1..=count`.
pub fn make_family(kind: FamilyKind, grid: Grid, kappa: f64, count: usize, epsilon: f64) -> Result<MetricFamily> {
    if count < 3 {
        return Err(LabError::invalid(format!("a family needs at least 3 members, got {count}")));
    }
    if !(kappa < 0.0) {
        return Err(LabError::invalid(format!(
            "kappa = {kappa}: on a torus a nonflat conformal member cannot keep R >= 0, so kappa must be negative"
        )));
    }
    if !(epsilon > 0.0) {
        return Err(LabError::invalid("epsilon must be positive"));
    }
    if grid.side() / 4.0 <= BUMP_OUTER {
        return Err(LabError::invalid(format!("box side {} too small for the member bumps", grid.side())));
    }
    let euclid = MetricField::euclidean(grid);
    let bump = |p: [f64; 3]| smooth_step(radius(p), BUMP_INNER, BUMP_OUTER);
    let mut parameters = vec![("kappa".to_string(), kappa), ("epsilon".to_string(), epsilon)];

    let spike_members = |parameters: &mut Vec<(String, f64)>| -> Result<Vec<MetricField>> {
        if grid.dim() != 2 {
            return Err(LabError::invalid("the conformal-spike family is two-dimensional"));
        }
        let c = SPIKE_PLATEAU * kappa.abs();
        parameters.extend([
            ("plateau".to_string(), c),
            ("period".to_string(), SPIKE_PERIOD),
            ("width".to_string(), SPIKE_WIDTH),
            ("shrink".to_string(), SPIKE_SHRINK),
        ]);
        (1..=count)
            .map(|i| {
                // member i oscillates at frequency i + 1; at frequency 1 the
                // bump's own curvature would dominate the second derivatives
                let fi = (i + 1) as f64;
                let sigma = SPIKE_WIDTH * SPIKE_SHRINK.powi(i as i32 - 1);
                let u = TensorField::scalar_from_fn(grid, |p| {
                    spike_profile(fi * p[0], c, SPIKE_PERIOD, sigma) * bump(p) / (fi * fi)
                });
                MetricField::conformal(&u)
            })
            .collect()
    };

    let (metrics, limit) = match kind {
        FamilyKind::ConformalSpike => (spike_members(&mut parameters)?, euclid.clone()),
        FamilyKind::SmoothConverging => {
            let shape = TensorField::scalar_from_fn(grid, bump);
            // R ≈ -2 Δu in the bump; keep it within half of |κ|
            let lap = (0..grid.dim())
                .map(|a| crate::grid_tensor::partial_derivative(&shape, a, 2))
                .collect::<Result<Vec<_>>>()?;
            let max_lap =
                (0..grid.len()).map(|node| lap.iter().map(|l| l.get(node, 0)).sum::<f64>().abs()).fold(0.0, f64::max);
            let amp = 0.25 * kappa.abs() / max_lap;
            parameters.push(("amplitude".to_string(), amp));
            let metrics =
                (1..=count).map(|i| MetricField::conformal(&shape.scale(amp / i as f64))).collect::<Result<_>>()?;
            (metrics, euclid.clone())
        }
        FamilyKind::Glued => {
            let r_out = 0.98 * grid.side() / 4.0;
            if r_out <= 1.2 {
                return Err(LabError::invalid(format!(
                    "box side {} leaves no room for a cutoff between B(o, 1) and the middle half; use a side above 4.9",
                    grid.side()
                )));
            }
            let phi = cutoff(grid, 1.0, r_out)?;
            parameters.push(("cutoff_outer".to_string(), r_out));
            let metrics =
                spike_members(&mut parameters)?.iter().map(|g| glue_to_euclidean(g, &phi)).collect::<Result<_>>()?;
            (metrics, glue_to_euclidean(&euclid, &phi)?)
        }
        FamilyKind::NegativeControl => {
            parameters.push(("control_depth".to_string(), CONTROL_DEPTH));
            parameters.push(("control_width".to_string(), CONTROL_WIDTH));
            let u = TensorField::scalar_from_fn(grid, |p| {
                let r = radius(p);
                -CONTROL_DEPTH * (-r * r / (2.0 * CONTROL_WIDTH * CONTROL_WIDTH)).exp() * bump(p)
            });
            (spike_members(&mut parameters)?, MetricField::conformal(&u)?)
        }
    };

    let members = metrics
        .into_iter()
        .enumerate()
        .map(|(k, metric)| {
            let min_r = member_check(&metric, kappa, epsilon, k + 1)?;
            let distance_to_limit = sup_distance(&metric, &limit)?;
            Ok(FamilyMember { index: k + 1, metric, distance_to_limit, min_r })
        })
        .collect::<Result<_>>()?;
    Ok(MetricFamily { kind, kappa, members, limit, parameters })
}
