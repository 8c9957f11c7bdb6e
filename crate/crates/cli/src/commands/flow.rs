use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Result};
use clap::Args;
use rdt_lab::deturck_flow::{evolve, FlowConfig};
use serde::{Deserialize, Serialize};

use super::{set, GridArgs, MetricArgs, OutputArgs};
use crate::config::{self, GridConfig, MetricSpec};
use crate::output::{Csv, Outputs};

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct FlowRunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub grid: GridConfig,
    pub metric: MetricSpec,
    pub t_end: f64,
    /// Equally spaced record times up to `t_end`.
    pub records: usize,
    pub cfl_fraction: f64,
    pub fixed_dt: Option<f64>,
    pub epsilon: f64,
    pub require_local_support: bool,
    /// Write the recorded metrics as snapshots.
    pub snapshots: bool,
}

impl Default for FlowRunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: "rdt-out".into(),
            grid: GridConfig::default(),
            metric: MetricSpec::Flat,
            t_end: 0.1,
            records: 10,
            cfl_fraction: 0.2,
            fixed_dt: None,
            epsilon: 0.1,
            require_local_support: true,
            snapshots: true,
        }
    }
}

#[derive(Debug, Args)]
pub struct FlowArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub metric: MetricArgs,
    #[command(flatten)]
    pub out: OutputArgs,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub records: Option<usize>,
    #[arg(long)]
    pub cfl_fraction: Option<f64>,
    #[arg(long)]
    pub fixed_dt: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Accept perturbations reaching outside the middle half of the box.
    #[arg(long)]
    pub allow_global_support: bool,
    #[arg(long)]
    pub no_snapshots: bool,
}

#[derive(Debug, Serialize)]
struct Summary {
    status: &'static str,
    steps: usize,
    final_t: f64,
    bilipschitz_violation: Option<f64>,
    curvature_decay_constant: Option<f64>,
    smoothing_constants: Vec<f64>,
}

pub fn run(config: Option<&Path>, args: &FlowArgs) -> Result<Vec<PathBuf>> {
    let mut cfg: FlowRunConfig = config::load(config)?;
    args.grid.apply(&mut cfg.grid);
    args.metric.apply(&mut cfg.metric)?;
    args.out.apply(&mut cfg.seed, &mut cfg.output_dir);
    set(&mut cfg.t_end, &args.t_end);
    set(&mut cfg.records, &args.records);
    set(&mut cfg.cfl_fraction, &args.cfl_fraction);
    set(&mut cfg.epsilon, &args.epsilon);
    if args.fixed_dt.is_some() {
        cfg.fixed_dt = args.fixed_dt;
    }
    if args.allow_global_support {
        cfg.require_local_support = false;
    }
    if args.no_snapshots {
        cfg.snapshots = false;
    }
    ensure!(cfg.records > 0, "records must be positive");
    let grid = cfg.grid.build()?;
    cfg.metric.validate(&grid)?;
    let flow_cfg = FlowConfig {
        cfl_fraction: cfg.cfl_fraction,
        epsilon: cfg.epsilon,
        fixed_dt: cfg.fixed_dt,
        require_local_support: cfg.require_local_support,
        ..FlowConfig::uniform(cfg.t_end, cfg.records)
    };
    flow_cfg.validate()?;

    let g0 = cfg.metric.build(grid, &mut config::rng(cfg.seed))?;
    let traj = evolve(&g0, &flow_cfg)?;
    if let Some(f) = &traj.failure {
        bail!("flow stopped early: {f:?}");
    }

    let mut out = Outputs::default();
    let mut csv = Csv::new(&["t", "bilipschitz", "sup_h", "sup_d1g", "sup_d2g", "sup_d3g", "minR", "maxR", "maxRm"]);
    for (k, s) in traj.states.iter().enumerate() {
        let d = &s.diagnostics;
        let dg = |m| d.sup_dg(m).unwrap_or(f64::NAN);
        csv.nums(&[s.t, d.bilipschitz, d.sup_h, dg(1), dg(2), dg(3), d.min_r, d.max_r, d.max_rm]);
        if cfg.snapshots {
            out.snapshot(&format!("g_{k:04}.tfs"), s.g.tensor())?;
        }
    }
    out.csv("trajectory.csv", csv);
    let summary = Summary {
        status: "complete",
        steps: traj.steps.len(),
        final_t: traj.final_state().t,
        bilipschitz_violation: traj.bilipschitz_violation,
        curvature_decay_constant: traj.curvature_decay_constant(),
        smoothing_constants: (1..=3).filter_map(|m| traj.smoothing_constant(m)).collect(),
    };
    out.text("summary.toml", toml::to_string(&summary)?);
    out.commit(&cfg.output_dir)
}
