use std::path::{Path, PathBuf};

use anyhow::{ensure, Result};
use clap::Args;
use rdt_lab::curvature::compute_curvature;
use rdt_lab::grid_tensor::sup_norm;
use serde::Deserialize;

use super::{set, GridArgs, MetricArgs, OutputArgs};
use crate::config::{self, GridConfig, MetricSpec};
use crate::output::{Csv, Outputs};

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct CurvatureConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub grid: GridConfig,
    pub metric: MetricSpec,
    /// Allowed `sup |R - R_exact|` where a closed form exists.
    pub tolerance: f64,
}

impl Default for CurvatureConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: "rdt-out".into(),
            grid: GridConfig::default(),
            metric: MetricSpec::Flat,
            tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Args)]
pub struct CurvatureArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub metric: MetricArgs,
    #[command(flatten)]
    pub out: OutputArgs,
    #[arg(long)]
    pub tolerance: Option<f64>,
}

pub fn run(config: Option<&Path>, args: &CurvatureArgs) -> Result<Vec<PathBuf>> {
    let mut cfg: CurvatureConfig = config::load(config)?;
    args.grid.apply(&mut cfg.grid);
    args.metric.apply(&mut cfg.metric)?;
    args.out.apply(&mut cfg.seed, &mut cfg.output_dir);
    set(&mut cfg.tolerance, &args.tolerance);
    config::positive("tolerance", cfg.tolerance)?;
    let grid = cfg.grid.build()?;
    cfg.metric.validate(&grid)?;

    let g = cfg.metric.build(grid, &mut config::rng(cfg.seed))?;
    let b = compute_curvature(&g)?;
    let (min_r, max_r) = b.scalar.min_max();
    let max_rm = b.rm_norm.min_max().1;
    let error = match cfg.metric.analytic_scalar(grid) {
        Some(exact) => Some(sup_norm(&b.scalar.sub(&exact)?)),
        None => None,
    };
    if let Some(e) = error {
        ensure!(e.is_finite(), "non-finite curvature error");
    }

    let mut out = Outputs::default();
    out.snapshot("R.tfs", &b.scalar)?;
    out.snapshot("Ric.tfs", &b.ricci)?;
    out.snapshot("Rm.tfs", &b.riemann)?;
    let mut summary = Csv::new(&["minR", "maxR", "maxRm", "sup_err_analytic", "tolerance", "within_tolerance"]);
    let e = error.unwrap_or(f64::NAN);
    let within = error.map_or("n/a".to_string(), |e| (e <= cfg.tolerance).to_string());
    summary.row(&[
        crate::output::num(min_r),
        crate::output::num(max_r),
        crate::output::num(max_rm),
        crate::output::num(e),
        crate::output::num(cfg.tolerance),
        within,
    ]);
    out.csv("summary.csv", summary);
    log::info!("min R {min_r:e}, max R {max_r:e}, analytic error {e:e}");
    out.commit(&cfg.output_dir)
}
