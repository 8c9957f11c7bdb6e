use std::path::{Path, PathBuf};

use anyhow::{ensure, Result};
use clap::Args;
use rdt_lab::deturck_flow::{evolve, FlowConfig};
use rdt_lab::heat_kernel::{conjugate_kernel_series, fit_gaussian_bound, Background, MIN_KERNEL_TIME};
use serde::{Deserialize, Serialize};

use super::{set, GridArgs, MetricArgs, OutputArgs};
use crate::config::{self, GridConfig, MetricSpec};
use crate::output::{Csv, Outputs};

#[derive(Debug, Clone, Copy, Deserialize, Serialize, PartialEq, Eq, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BackgroundKind {
    /// The initial metric held fixed.
    Frozen,
    /// The Ricci DeTurck flow of the initial metric.
    Flow,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub grid: GridConfig,
    pub metric: MetricSpec,
    pub background: BackgroundKind,
    /// Final time of every kernel (the conjugate kernel's `t`).
    pub t: f64,
    /// Number of snapshots, with `t - s` spread geometrically.
    pub samples: usize,
    /// Shortest `t - s`; defaults to `10 dx²`.
    pub tau_min: Option<f64>,
    /// Ratio of the longest to the shortest `t - s`.
    pub span: f64,
    pub cfl_fraction: f64,
    pub require_local_support: bool,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: "rdt-out".into(),
            grid: GridConfig::default(),
            metric: MetricSpec::Flat,
            background: BackgroundKind::Flow,
            t: 0.2,
            samples: 10,
            tau_min: None,
            span: 4.0,
            cfl_fraction: 0.2,
            require_local_support: true,
        }
    }
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub metric: MetricArgs,
    #[command(flatten)]
    pub out: OutputArgs,
    #[arg(long, value_enum)]
    pub background: Option<BackgroundKind>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub tau_min: Option<f64>,
    #[arg(long)]
    pub span: Option<f64>,
    #[arg(long)]
    pub cfl_fraction: Option<f64>,
    #[arg(long)]
    pub allow_global_support: bool,
}

#[derive(Debug, Serialize)]
struct Summary {
    d: f64,
    c2: f64,
    c2_pointwise: f64,
    c2_tail: f64,
    valid_pairs: usize,
    max_mass_error: f64,
}

pub fn run(config: Option<&Path>, args: &KernelArgs) -> Result<Vec<PathBuf>> {
    let mut cfg: KernelConfig = config::load(config)?;
    args.grid.apply(&mut cfg.grid);
    args.metric.apply(&mut cfg.metric)?;
    args.out.apply(&mut cfg.seed, &mut cfg.output_dir);
    set(&mut cfg.background, &args.background);
    set(&mut cfg.t, &args.t);
    set(&mut cfg.samples, &args.samples);
    set(&mut cfg.span, &args.span);
    set(&mut cfg.cfl_fraction, &args.cfl_fraction);
    if args.tau_min.is_some() {
        cfg.tau_min = args.tau_min;
    }
    if args.allow_global_support {
        cfg.require_local_support = false;
    }

    let grid = cfg.grid.build()?;
    cfg.metric.validate(&grid)?;
    let floor = MIN_KERNEL_TIME * grid.dx() * grid.dx();
    let tau_min = cfg.tau_min.unwrap_or(floor);
    ensure!(
        tau_min >= floor,
        "t - s = {tau_min} is below the resolved minimum 10 dx^2 = {floor}; raise tau_min or refine the grid"
    );
    ensure!(cfg.samples >= 10, "the Gaussian fit needs at least 10 samples");
    ensure!(cfg.span >= 4.0, "span must be at least 4");
    ensure!(cfg.t > 0.0 && cfg.t < 1.0, "t must lie in (0, 1)");
    ensure!(tau_min * cfg.span <= cfg.t, "the longest t - s = {} exceeds t = {}", tau_min * cfg.span, cfg.t);

    let g0 = cfg.metric.build(grid, &mut config::rng(cfg.seed))?;
    let bg = match cfg.background {
        BackgroundKind::Frozen => Background::frozen(&g0, cfg.t)?,
        BackgroundKind::Flow => {
            let flow_cfg = FlowConfig {
                cfl_fraction: cfg.cfl_fraction,
                require_local_support: cfg.require_local_support,
                ..FlowConfig::uniform(cfg.t, 20)
            };
            let traj = evolve(&g0, &flow_cfg)?;
            ensure!(traj.failure.is_none(), "background flow stopped early: {:?}", traj.failure);
            Background::from_trajectory(&traj, true)?
        }
    };
    let n = cfg.samples;
    let sources: Vec<f64> = (0..n)
        .map(|j| {
            let tau = tau_min * cfg.span.powf(j as f64 / (n - 1) as f64);
            let s = cfg.t - tau;
            // keep t - s from rounding below tau
            if cfg.t - s < tau {
                s - f64::EPSILON * cfg.t
            } else {
                s
            }
        })
        .collect();
    let o = grid.origin_node();
    let snaps = conjugate_kernel_series(&bg, o, cfg.t, &sources)?;
    let fit = fit_gaussian_bound(&snaps, &bg)?;

    let mut out = Outputs::default();
    let mut kernel = Csv::new(&["tminus_s", "distance", "K_value", "gauss_bound", "tail_r", "tail_mass", "tail_bound"]);
    let mut samples = Csv::new(&["tminus_s", "mass", "sup_K"]);
    let mut max_mass_error: f64 = 0.0;
    for snap in &snaps {
        let tau = snap.elapsed();
        let w = bg.sqrt_det_at(snap.s)?;
        let vol = grid.cell_volume();
        let mut nodes: Vec<(f64, f64, f64)> = (0..grid.len())
            .map(|i| (grid.distance(o, i), snap.field.get(i, 0), snap.field.get(i, 0) * w.get(i, 0) * vol))
            .collect();
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        // mass at distance ≥ r, accumulated from the far end
        let mut tails = vec![0.0; nodes.len()];
        let mut acc = 0.0;
        for k in (0..nodes.len()).rev() {
            acc += nodes[k].2;
            tails[k] = acc;
        }
        for k in 1..nodes.len() {
            if nodes[k].0 - nodes[k - 1].0 <= 1e-12 {
                tails[k] = tails[k - 1];
            }
        }
        for (k, &(d, v, _)) in nodes.iter().enumerate() {
            kernel.nums(&[tau, d, v, fit.pointwise_bound(grid.dim(), tau, d), d, tails[k], fit.tail_bound(tau, d)]);
        }
        samples.nums(&[tau, snap.mass, snap.sup()]);
        max_mass_error = max_mass_error.max((snap.mass - 1.0).abs());
    }
    let mut table = Csv::new(&["D", "C2_pointwise", "C2_tail"]);
    for w in &fit.table {
        table.nums(&[w.d, w.c2_pointwise, w.c2_tail]);
    }
    out.csv("kernel.csv", kernel);
    out.csv("samples.csv", samples);
    out.csv("fit_table.csv", table);
    let summary = Summary {
        d: fit.d,
        c2: fit.c2,
        c2_pointwise: fit.c2_pointwise,
        c2_tail: fit.c2_tail,
        valid_pairs: fit.valid_pairs,
        max_mass_error,
    };
    out.text("summary.toml", toml::to_string(&summary)?);
    out.commit(&cfg.output_dir)
}
