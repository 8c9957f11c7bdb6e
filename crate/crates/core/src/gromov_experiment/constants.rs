use crate::error::{LabError, Result};
use crate::heat_kernel::GaussianFit;

/// Upper limit on the ladder index searched for `N`.
const MAX_INDEX: usize = 100_000;

/// Constants of the scalar-curvature ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderConstants {
    pub theta: f64,
    pub beta: f64,
    pub c: f64,
    pub lambda: f64,
    pub d: f64,
    pub c2: f64,
    /// Curvature decay constant, already including the safety factor.
    pub c3: f64,
    pub delta: f64,
    /// Smallest index whose tail sum is below `delta`.
    pub n: usize,
    pub tau: f64,
}

impl LadderConstants {
    /// `2 C₂ C₃ (1-θ)^{-k} exp(-c (1+λ)^k)`, the loss between rungs `k` and `k+1`.
    pub fn loss(&self, k: usize) -> f64 {
        loss(self.c2, self.c3, self.theta, self.c, self.lambda, k)
    }

    /// `Σ_{j ≥ k} loss(j)`.
    pub fn tail_sum(&self, k: usize) -> f64 {
        tail_sums(self.c2, self.c3, self.theta, self.c, self.lambda, k).0
    }

    pub fn t(&self, k: usize) -> f64 {
        (1.0 - self.theta).powi(k as i32)
    }

    pub fn r(&self, k: usize) -> f64 {
        1.0 - (1.0 - self.beta).powi(k as i32)
    }

    /// The five defining relations, each with its truth value.
    pub fn invariants(&self) -> [(&'static str, bool); 5] {
        let th = self.theta;
        [
            ("1 - beta > sqrt(1 - theta)", 1.0 - self.beta > (1.0 - th).sqrt()),
            ("c = beta^2 / (D theta)", self.c == self.beta * self.beta / (self.d * th)),
            ("1 + lambda < (1 - beta)^2 / (1 - theta)", 1.0 + self.lambda < (1.0 - self.beta).powi(2) / (1.0 - th)),
            ("tau = (1 - theta)^N", self.tau == self.t(self.n)),
            ("tail sum from N < delta", self.tail_sum(self.n) < self.delta),
        ]
    }

    pub fn all_invariants_hold(&self) -> bool {
        self.invariants().iter().all(|(_, ok)| *ok)
    }
}

fn loss(c2: f64, c3: f64, theta: f64, c: f64, lambda: f64, k: usize) -> f64 {
    let k = k as f64;
    let log = (2.0 * c2 * c3).ln() - k * (1.0 - theta).ln() - c * (k * lambda.ln_1p()).exp();
    log.exp()
}

/// Tail sum from `k` and the bound used for the truncated remainder.
fn tail_sums(c2: f64, c3: f64, theta: f64, c: f64, lambda: f64, k: usize) -> (f64, f64) {
    // past the peak the terms fall double exponentially; stop once a term and
    // the ratio to its predecessor are both small, bounding the rest by a
    // geometric series
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    for j in k..MAX_INDEX {
        let term = loss(c2, c3, theta, c, lambda, j);
        sum += term;
        let ratio = term / prev;
        if term <= 1e-300 || (ratio < 0.5 && term <= 1e-18 * sum.max(f64::MIN_POSITIVE)) {
            let rest = if ratio < 1.0 { term * ratio / (1.0 - ratio) } else { 0.0 };
            return (sum + rest, rest);
        }
        prev = term;
    }
    (sum, f64::INFINITY)
}

/// Chooses the ladder constants for `θ`, the heat kernel fit, `C₃` and `δ`.
///
/// `β` and `λ` sit at the midpoints of their admissible ranges. With
/// `min_resolved_time = Some(t_min)` an `N` with `(1-θ)^N < t_min` is rejected.
pub fn derive_constants(
    theta: f64,
    fit: &GaussianFit,
    c3: f64,
    delta: f64,
    min_resolved_time: Option<f64>,
) -> Result<LadderConstants> {
    if !(theta > 0.0 && theta < 0.5) {
        return Err(LabError::invalid(format!("theta = {theta} must lie in (0, 1/2)")));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(LabError::invalid(format!("delta = {delta} must be positive")));
    }
    if !(c3 > 0.0) || !c3.is_finite() {
        return Err(LabError::invalid(format!("C3 = {c3} must be positive")));
    }
    if !(fit.c2 > 0.0 && fit.c2.is_finite() && fit.d > 0.0 && fit.d.is_finite()) {
        return Err(LabError::invalid("Gaussian fit constants must be positive and finite"));
    }
    let root = (1.0 - theta).sqrt();
    let beta = 0.5 * (1.0 - root);
    let lambda = 0.5 * ((1.0 - beta).powi(2) / (1.0 - theta) - 1.0);
    let c = beta * beta / (fit.d * theta);
    let (c2, d) = (fit.c2, fit.d);

    // suffix sums S_k = Σ_{j ≥ k} loss(j), accumulated downward from the
    // first index whose term underflows to zero
    let mut last = 1;
    while loss(c2, c3, theta, c, lambda, last) > 0.0 {
        last += 1;
        if last >= MAX_INDEX {
            return Err(LabError::Diagnostic("ladder series did not converge numerically".into()));
        }
    }
    let mut suffix = 0.0;
    let mut n = last;
    for k in (1..last).rev() {
        let s = suffix + loss(c2, c3, theta, c, lambda, k);
        if s >= delta {
            break;
        }
        suffix = s;
        n = k;
    }
    let tau = (1.0 - theta).powi(n as i32);
    if let Some(t_min) = min_resolved_time {
        if tau < t_min {
            return Err(LabError::Resolution(format!(
                "N = {n} gives tau = {tau:e}, below the resolved time {t_min:e}; raise delta or refine the grid"
            )));
        }
    }
    Ok(LadderConstants { theta, beta, c, lambda, d, c2, c3, delta, n, tau })
}
