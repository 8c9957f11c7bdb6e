use std::f64::consts::PI;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rdt_lab::grid_tensor::{sym_index, Grid, MetricField, Rank, TensorField};
use rdt_lab::gromov_experiment::smooth_step;
use serde::de::DeserializeOwned;
use serde::Deserialize;

/// Reads a TOML config, or the defaults when no file is given.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub n_ax: usize,
    /// Box side; ignored when `dx` is given.
    pub side: f64,
    pub dx: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { dim: 2, n_ax: 64, side: 4.0, dx: None }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid> {
        ensure!(self.dim == 2 || self.dim == 3, "dim must be 2 or 3, got {}", self.dim);
        let grid = match self.dx {
            Some(dx) => Grid::new(self.dim, self.n_ax, dx)?,
            None => Grid::with_side(self.dim, self.n_ax, self.side)?,
        };
        Ok(grid)
    }
}

/// Initial metric of an experiment.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MetricSpec {
    #[default]
    Flat,
    /// `e^{2u} g_eucl`, `u = amp sin(2πx/L) sin(2πy/L)`.
    ConformalSine { amp: f64 },
    /// `e^{2u} g_eucl`, `u = amp · step(|x|; 0, radius)`.
    ConformalBump { amp: f64, radius: f64 },
    /// Random Fourier perturbation per component, cut off inside the middle half.
    Random { amp: f64, modes: usize },
}

impl MetricSpec {
    pub fn from_flags(kind: &str, amp: Option<f64>, radius: Option<f64>, modes: Option<usize>) -> Result<Self> {
        Ok(match kind {
            "flat" => MetricSpec::Flat,
            "conformal-sine" => MetricSpec::ConformalSine { amp: amp.unwrap_or(0.1) },
            "conformal-bump" => MetricSpec::ConformalBump { amp: amp.unwrap_or(0.04), radius: radius.unwrap_or(0.8) },
            "random" => MetricSpec::Random { amp: amp.unwrap_or(0.02), modes: modes.unwrap_or(3) },
            other => bail!("unknown metric kind {other:?}"),
        })
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        match *self {
            MetricSpec::Flat => {}
            MetricSpec::ConformalSine { amp } => {
                ensure!(amp.is_finite() && amp.abs() < 1.0, "amp must be finite and below 1")
            }
            MetricSpec::ConformalBump { amp, radius } => {
                ensure!(amp.is_finite() && amp.abs() < 1.0, "amp must be finite and below 1");
                ensure!(radius > 0.0 && radius <= grid.side() / 4.0, "radius must lie in (0, L/4]");
            }
            MetricSpec::Random { amp, modes } => {
                ensure!(amp.is_finite() && amp.abs() < 0.2, "random amp must be below 0.2");
                ensure!(modes > 0 && modes <= 64, "modes must lie in 1..=64");
            }
        }
        Ok(())
    }

    /// The conformal factor, when the metric is conformally flat.
    fn conformal_u(&self, grid: Grid) -> Option<TensorField> {
        let k = 2.0 * PI / grid.side();
        match *self {
            MetricSpec::ConformalSine { amp } => {
                Some(TensorField::scalar_from_fn(grid, |p| amp * (k * p[0]).sin() * (k * p[1]).sin()))
            }
            MetricSpec::ConformalBump { amp, radius } => Some(TensorField::scalar_from_fn(grid, |p| {
                amp * smooth_step((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt(), 0.0, radius)
            })),
            _ => None,
        }
    }

    pub fn build(&self, grid: Grid, rng: &mut ChaCha8Rng) -> Result<MetricField> {
        self.validate(&grid)?;
        if let Some(u) = self.conformal_u(grid) {
            return Ok(MetricField::conformal(&u)?);
        }
        match *self {
            MetricSpec::Random { amp, modes } => {
                let n = grid.dim();
                let k0 = 2.0 * PI / grid.side();
                let outer = 0.95 * grid.side() / 4.0;
                let terms: Vec<Vec<(f64, [f64; 3], f64)>> = (0..n * (n + 1) / 2)
                    .map(|_| {
                        (0..modes)
                            .map(|_| {
                                let mut kv = [0.0; 3];
                                for ka in kv.iter_mut().take(n) {
                                    *ka = k0 * rng.gen_range(-2i32..=2) as f64;
                                }
                                (amp * rng.gen_range(-1.0..1.0), kv, rng.gen_range(0.0..2.0 * PI))
                            })
                            .collect()
                    })
                    .collect();
                let h = TensorField::from_fn(grid, Rank::SymCov2, |p, out| {
                    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                    let cut = smooth_step(r, 0.5 * outer, outer);
                    for i in 0..n {
                        for j in i..n {
                            let c = sym_index(n, i, j);
                            out[c] = cut
                                * terms[c]
                                    .iter()
                                    .map(|(a, kv, ph)| a * (kv[0] * p[0] + kv[1] * p[1] + kv[2] * p[2] + ph).sin())
                                    .sum::<f64>();
                        }
                    }
                });
                Ok(MetricField::from_perturbation(&h)?)
            }
            _ => Ok(MetricField::euclidean(grid)),
        }
    }

    /// Closed-form scalar curvature where one is known.
    pub fn analytic_scalar(&self, grid: Grid) -> Option<TensorField> {
        let n = grid.dim() as f64;
        let k = 2.0 * PI / grid.side();
        match *self {
            MetricSpec::Flat => Some(TensorField::zeros(grid, Rank::Scalar)),
            MetricSpec::ConformalSine { amp } => Some(TensorField::scalar_from_fn(grid, |p| {
                let (sx, cx, sy, cy) = ((k * p[0]).sin(), (k * p[0]).cos(), (k * p[1]).sin(), (k * p[1]).cos());
                let u = amp * sx * sy;
                let lap = -2.0 * k * k * u;
                let grad2 = (amp * k).powi(2) * (cx * cx * sy * sy + sx * sx * cy * cy);
                // R(e^{2u} g_eucl) = -e^{-2u} (2(n-1) Δu + (n-2)(n-1) |∇u|²)
                -(-2.0 * u).exp() * (2.0 * (n - 1.0) * lap + (n - 2.0) * (n - 1.0) * grad2)
            })),
            _ => None,
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn positive(name: &str, v: f64) -> Result<()> {
    ensure!(v.is_finite() && v > 0.0, "{name} must be positive and finite, got {v}");
    Ok(())
}
