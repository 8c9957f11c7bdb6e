use crate::curvature::compute_curvature;
use crate::deturck_flow::Trajectory;
use crate::error::{LabError, Result};
use crate::grid_tensor::{sym_eigen_range, Grid, MetricField, Rank, TensorField};

/// Coefficients of the drift heat operator `a^ij ∂_i∂_j u + b^k ∂_k u` at one time,
/// plus the volume density and scalar curvature of the metric.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    /// `g^ij`.
    pub a: TensorField,
    /// `-g^ij Γ^k_ij - X^k`; vanishes up to roundoff in DeTurck gauge.
    pub b: TensorField,
    pub sqrt_det: TensorField,
    pub scalar: TensorField,
    /// Largest eigenvalue of `g^ij` over the grid.
    pub max_a: f64,
}

impl Coefficients {
    fn from_metric(g: &MetricField, drift: bool) -> Result<Self> {
        let b = compute_curvature(g)?;
        let grid = *g.grid();
        let n = grid.dim();
        // -g^ij Γ^k_ij equals the DeTurck field, so the drift cancels it
        let mut coeff = b.deturck.clone();
        if drift {
            coeff.add_scaled(-1.0, &b.deturck)?;
        }
        let max_a = (0..grid.len()).map(|i| sym_eigen_range(&g.inverse_matrix(i), n).1).fold(0.0, f64::max);
        Ok(Self { a: g.inverse().clone(), b: coeff, sqrt_det: g.sqrt_det().clone(), scalar: b.scalar, max_a })
    }

    fn lerp(&self, other: &Self, w: f64) -> Result<Self> {
        let mix = |x: &TensorField, y: &TensorField| -> Result<TensorField> {
            let mut out = x.scale(1.0 - w);
            out.add_scaled(w, y)?;
            Ok(out)
        };
        Ok(Self {
            a: mix(&self.a, &other.a)?,
            b: mix(&self.b, &other.b)?,
            sqrt_det: mix(&self.sqrt_det, &other.sqrt_det)?,
            scalar: mix(&self.scalar, &other.scalar)?,
            max_a: self.max_a.max(other.max_a),
        })
    }
}

/// Evolving background for scalar heat equations: operator coefficients at
/// recorded times, linearly interpolated in between.
#[derive(Debug, Clone)]
pub struct Background {
    grid: Grid,
    times: Vec<f64>,
    records: Vec<Coefficients>,
}

impl Background {
    /// Background of a flow trajectory; `drift` selects the DeTurck drift
    /// `-X·∇u` in the operator (the equation of the kernel) or omits it.
    pub fn from_trajectory(traj: &Trajectory, drift: bool) -> Result<Self> {
        let states = &traj.states;
        if states.len() < 2 {
            return Err(LabError::invalid("background needs at least two recorded states"));
        }
        let grid = *states[0].g.grid();
        let times: Vec<f64> = states.iter().map(|s| s.t).collect();
        let records = states.iter().map(|s| Coefficients::from_metric(&s.g, drift)).collect::<Result<Vec<_>>>()?;
        Ok(Self { grid, times, records })
    }

    /// Time-independent background of one metric on `[0, t_end]`.
    pub fn frozen(g: &MetricField, t_end: f64) -> Result<Self> {
        if !(t_end > 0.0) {
            return Err(LabError::invalid("frozen background needs t_end > 0"));
        }
        let c = Coefficients::from_metric(g, true)?;
        Ok(Self { grid: *g.grid(), times: vec![0.0, t_end], records: vec![c.clone(), c] })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn span(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().expect("non-empty"))
    }

    pub(crate) fn check_interval(&self, s: f64, t: f64) -> Result<()> {
        let (lo, hi) = self.span();
        let tol = 1e-12 * (1.0 + hi.abs());
        if !(s < t) || s < lo - tol || t > hi + tol {
            return Err(LabError::invalid(format!("interval [{s}, {t}] not inside background span [{lo}, {hi}]")));
        }
        Ok(())
    }

    /// Coefficients at time `t`, linear in time between records.
    pub fn at(&self, t: f64) -> Result<Coefficients> {
        let k = self.times.partition_point(|&x| x <= t);
        if k == 0 {
            return Ok(self.records[0].clone());
        }
        if k >= self.times.len() {
            return Ok(self.records.last().expect("non-empty").clone());
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        if w == 0.0 {
            return Ok(self.records[k - 1].clone());
        }
        self.records[k - 1].lerp(&self.records[k], w)
    }

    /// Upper bound of `g^ij` eigenvalues over records touching `[s, t]`.
    pub(crate) fn max_a(&self, s: f64, t: f64) -> f64 {
        let lo = self.times.partition_point(|&x| x <= s).saturating_sub(1);
        let hi = self.times.partition_point(|&x| x < t).min(self.times.len() - 1);
        self.records[lo..=hi].iter().map(|c| c.max_a).fold(0.0, f64::max)
    }

    /// Scalar curvature field at `t`.
    pub fn scalar_at(&self, t: f64) -> Result<TensorField> {
        Ok(self.at(t)?.scalar)
    }

    /// `sqrt(det g)` at `t`.
    pub fn sqrt_det_at(&self, t: f64) -> Result<TensorField> {
        Ok(self.at(t)?.sqrt_det)
    }

    /// `∫ f dV_t` of a scalar field.
    pub fn integrate(&self, f: &TensorField, t: f64) -> Result<f64> {
        if f.rank() != Rank::Scalar {
            return Err(LabError::invalid("can only integrate scalar fields"));
        }
        let w = self.sqrt_det_at(t)?;
        Ok(f.component(0).iter().zip(w.component(0)).map(|(a, b)| a * b).sum::<f64>() * self.grid.cell_volume())
    }
}
