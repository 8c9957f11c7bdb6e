use super::{Background, KernelSnapshot};
use crate::error::{LabError, Result};

/// Candidate Gaussian widths `D`.
pub const D_GRID: [f64; 6] = [4.5, 5.0, 6.0, 8.0, 12.0, 16.0];

/// Kernel values below this fraction of the snapshot's maximum are numerical zero.
const ZERO_FRACTION: f64 = 1e-10;

/// A width is accepted when its constant is within this factor of the best one;
/// among accepted widths the smallest is chosen.
const TIE_FACTOR: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthChoice {
    pub d: f64,
    /// Smallest `C` with `K ≤ C τ^{-n/2} exp(-d²/(Dτ))` on every sample.
    pub c2_pointwise: f64,
    /// Smallest `C` with `∫_{d ≥ r} K ≤ C exp(-r²/(Dτ))` on every sample.
    pub c2_tail: f64,
}

impl WidthChoice {
    pub fn c2(&self) -> f64 {
        self.c2_pointwise.max(self.c2_tail)
    }
}

/// Empirical constants `(C₂, D)` of a Gaussian upper bound for the kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFit {
    /// One constant serving both the pointwise and the tail bound.
    pub c2: f64,
    pub c2_pointwise: f64,
    pub c2_tail: f64,
    pub d: f64,
    /// Number of `(t - s, distance)` pairs checked.
    pub valid_pairs: usize,
    /// Constants for every candidate width.
    pub table: Vec<WidthChoice>,
}

impl GaussianFit {
    /// Pointwise bound `C₂ τ^{-n/2} exp(-d²/(Dτ))`.
    pub fn pointwise_bound(&self, dim: usize, tau: f64, dist: f64) -> f64 {
        self.c2 * tau.powf(-(dim as f64) / 2.0) * (-dist * dist / (self.d * tau)).exp()
    }

    /// Tail bound `C₂ exp(-r²/(Dτ))`.
    pub fn tail_bound(&self, tau: f64, r: f64) -> f64 {
        self.c2 * (-r * r / (self.d * tau)).exp()
    }
}

/// Per-sample distances of every node from the anchor, with shell tail masses.
struct Profile {
    tau: f64,
    /// `(distance, K)` for nodes above the numerical-zero threshold.
    points: Vec<(f64, f64)>,
    /// `(r, ∫_{d ≥ r} K dg)` for each distinct shell radius below `L/2`.
    tails: Vec<(f64, f64)>,
}

fn profile(sample: &KernelSnapshot, bg: &Background) -> Result<Profile> {
    let grid = sample.field.grid();
    let k = sample.field.component(0);
    let sup = sample.sup();
    let time = match sample.orientation {
        super::Orientation::Forward => sample.t,
        super::Orientation::Conjugate => sample.s,
    };
    let w = bg.sqrt_det_at(time)?;
    let vol = grid.cell_volume();
    let mut by_dist: Vec<(f64, f64, f64)> =
        (0..grid.len()).map(|i| (grid.distance(sample.anchor, i), k[i], k[i] * w.get(i, 0) * vol)).collect();
    by_dist.sort_by(|a, b| a.0.total_cmp(&b.0));
    let points = by_dist.iter().filter(|p| p.1 > ZERO_FRACTION * sup).map(|p| (p.0, p.1)).collect();
    let half = grid.side() / 2.0;
    let mut tails = Vec::new();
    let mut acc = 0.0;
    let mut idx = by_dist.len();
    // accumulate from the far end, recording the mass at each shell boundary
    while idx > 0 {
        let r = by_dist[idx - 1].0;
        while idx > 0 && by_dist[idx - 1].0 >= r - 1e-12 {
            acc += by_dist[idx - 1].2;
            idx -= 1;
        }
        if r < half && acc > ZERO_FRACTION {
            tails.push((r, acc));
        }
    }
    Ok(Profile { tau: sample.elapsed(), points, tails })
}

/// Fits `(C₂, D)` over [`D_GRID`] to at least ten snapshots spanning a
/// factor four in `t - s`.
pub fn fit_gaussian_bound(samples: &[KernelSnapshot], bg: &Background) -> Result<GaussianFit> {
    if samples.len() < 10 {
        return Err(LabError::invalid(format!("need at least 10 snapshots, got {}", samples.len())));
    }
    let taus: Vec<f64> = samples.iter().map(KernelSnapshot::elapsed).collect();
    let lo = taus.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = taus.iter().copied().fold(0.0, f64::max);
    if hi < 4.0 * lo * (1.0 - 1e-12) {
        return Err(LabError::invalid(format!("snapshots span t - s in [{lo}, {hi}], less than a factor 4")));
    }
    let dim = bg.grid().dim() as f64;
    let profiles = samples.iter().map(|s| profile(s, bg)).collect::<Result<Vec<_>>>()?;
    let valid_pairs = profiles.iter().map(|p| p.points.len()).sum();
    let table: Vec<WidthChoice> = D_GRID
        .iter()
        .map(|&d| {
            let mut pw: f64 = 0.0;
            let mut tail: f64 = 0.0;
            for p in &profiles {
                for &(dist, k) in &p.points {
                    pw = pw.max(k * p.tau.powf(dim / 2.0) * (dist * dist / (d * p.tau)).exp());
                }
                for &(r, m) in &p.tails {
                    tail = tail.max(m * (r * r / (d * p.tau)).exp());
                }
            }
            WidthChoice { d, c2_pointwise: pw, c2_tail: tail }
        })
        .collect();
    let best = table.iter().map(WidthChoice::c2).filter(|c| c.is_finite()).fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(LabError::Diagnostic("no width in the grid admits a finite Gaussian constant".into()));
    }
    let chosen = *table.iter().find(|w| w.c2() <= TIE_FACTOR * best).expect("best width is accepted");
    Ok(GaussianFit {
        c2: chosen.c2(),
        c2_pointwise: chosen.c2_pointwise,
        c2_tail: chosen.c2_tail,
        d: chosen.d,
        valid_pairs,
        table,
    })
}
