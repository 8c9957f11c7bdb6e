use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, ensure, Result};
use clap::Args;
use rdt_lab::gromov_experiment::{make_family, verify_theorem, FamilyKind, LadderSettings, TheoremSettings};
use serde::Deserialize;

use super::{set, GridArgs, OutputArgs};
use crate::config::{self, GridConfig};
use crate::output::{num, Csv, Outputs};

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GromovConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub grid: GridConfig,
    /// conformal-spike, smooth-c2-converging, glued or negative-control.
    pub family: String,
    pub count: usize,
    /// Curvature bound the family is built around.
    pub kappa: f64,
    /// The bound `κ'` to be recovered in the limit.
    pub kappa_lo: f64,
    /// The bound `κ''` assumed on the members; defaults to `kappa`.
    pub kappa_hi: Option<f64>,
    pub delta: f64,
    pub theta: f64,
    pub cfl_fraction: f64,
    pub epsilon: f64,
    pub t_max: f64,
    pub lipschitz_bound: f64,
    pub extrapolation_tolerance: f64,
    /// Write the initial metrics of the members and the limit as snapshots.
    pub snapshots: bool,
}

impl Default for GromovConfig {
    fn default() -> Self {
        let ladder = LadderSettings::default();
        let theorem = TheoremSettings::default();
        Self {
            seed: 0,
            output_dir: "rdt-out".into(),
            grid: GridConfig::default(),
            family: FamilyKind::ConformalSpike.name().into(),
            count: 3,
            kappa: -1.5,
            kappa_lo: -1.7,
            kappa_hi: None,
            delta: ladder.delta,
            theta: ladder.theta,
            cfl_fraction: ladder.cfl_fraction,
            epsilon: ladder.epsilon,
            t_max: ladder.t_max,
            lipschitz_bound: theorem.lipschitz_bound,
            extrapolation_tolerance: theorem.extrapolation_tolerance,
            snapshots: false,
        }
    }
}

#[derive(Debug, Args)]
pub struct GromovArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub out: OutputArgs,
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub kappa: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub kappa_lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub kappa_hi: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub cfl_fraction: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub snapshots: bool,
}

fn q(s: &str) -> String {
    format!("{s:?}")
}

pub fn run(config: Option<&Path>, args: &GromovArgs) -> Result<Vec<PathBuf>> {
    let mut cfg: GromovConfig = config::load(config)?;
    args.grid.apply(&mut cfg.grid);
    args.out.apply(&mut cfg.seed, &mut cfg.output_dir);
    set(&mut cfg.family, &args.family);
    set(&mut cfg.count, &args.count);
    set(&mut cfg.kappa, &args.kappa);
    set(&mut cfg.kappa_lo, &args.kappa_lo);
    set(&mut cfg.delta, &args.delta);
    set(&mut cfg.theta, &args.theta);
    set(&mut cfg.cfl_fraction, &args.cfl_fraction);
    set(&mut cfg.epsilon, &args.epsilon);
    set(&mut cfg.t_max, &args.t_max);
    if args.kappa_hi.is_some() {
        cfg.kappa_hi = args.kappa_hi;
    }
    if args.snapshots {
        cfg.snapshots = true;
    }

    let kind = FamilyKind::from_name(&cfg.family).ok_or_else(|| anyhow!("unknown family {:?}", cfg.family))?;
    let kappa_hi = cfg.kappa_hi.unwrap_or(cfg.kappa);
    ensure!(cfg.count >= 3, "the family needs at least 3 members");
    ensure!(cfg.kappa_lo < kappa_hi, "need kappa_lo < kappa_hi");
    ensure!(kappa_hi - cfg.delta > cfg.kappa_lo, "delta must be below kappa_hi - kappa_lo");
    let settings = TheoremSettings {
        ladder: LadderSettings {
            theta: cfg.theta,
            delta: cfg.delta,
            epsilon: cfg.epsilon,
            cfl_fraction: cfg.cfl_fraction,
            t_max: cfg.t_max,
            ..LadderSettings::default()
        },
        lipschitz_bound: cfg.lipschitz_bound,
        extrapolation_tolerance: cfg.extrapolation_tolerance,
    };
    let grid = cfg.grid.build()?;
    settings.ladder.validate()?;
    settings.ladder.flow_config(grid.dx())?;

    let family = make_family(kind, grid, cfg.kappa, cfg.count, cfg.epsilon)?;
    let verdict = verify_theorem(&family, cfg.kappa_lo, kappa_hi, &settings)?;

    let mut out = Outputs::default();
    for (i, report) in verdict.member_ladders.iter().enumerate() {
        let mut csv = Csv::new(&["k", "t_k", "r_k", "a_k", "R_origin", "slack"]);
        for row in &report.rows {
            csv.row(&[
                row.k.to_string(),
                num(row.t),
                num(row.r),
                num(row.a),
                num(row.origin),
                row.slack.map(num).unwrap_or_default(),
            ]);
        }
        out.csv(&format!("ladder_{}.csv", i + 1), csv);
    }
    let mut dist = Csv::new(&["member", "initial_distance", "sup_flow_distance", "min_R_initial"]);
    for (m, (d0, dt)) in family.members.iter().zip(&verdict.distances) {
        dist.row(&[m.index.to_string(), num(*d0), num(*dt), num(m.min_r)]);
    }
    out.csv("distances.csv", dist);
    let mut lim = Csv::new(&["t_k", "R_origin"]);
    for &(t, r) in &verdict.limit_origin {
        lim.nums(&[t, r]);
    }
    out.csv("limit.csv", lim);
    if cfg.snapshots {
        for m in &family.members {
            out.snapshot(&format!("member_{}.tfs", m.index), m.metric.tensor())?;
        }
        out.snapshot("limit.tfs", family.limit.tensor())?;
    }

    let mut v = String::new();
    writeln!(v, "verdict = {}", q(&verdict.to_string()))?;
    writeln!(v, "passed = {}", verdict.passed())?;
    writeln!(v, "family = {}", q(kind.name()))?;
    writeln!(v, "count = {}", cfg.count)?;
    writeln!(v, "kappa = {}", num(cfg.kappa))?;
    writeln!(v, "kappa_lo = {}", num(cfg.kappa_lo))?;
    writeln!(v, "kappa_hi = {}", num(kappa_hi))?;
    writeln!(v, "convergence_order = {}", num(verdict.convergence_order))?;
    writeln!(v, "extrapolated_R_origin = {}", num(verdict.extrapolated))?;
    writeln!(v, "direct_R_origin = {}", num(verdict.direct))?;
    writeln!(v, "\n[parameters]")?;
    for (name, value) in &family.parameters {
        writeln!(v, "{} = {}", q(name), num(*value))?;
    }
    for s in &verdict.stages {
        writeln!(v, "\n[stages.{}]", s.stage.label())?;
        writeln!(v, "name = {}", q(s.stage.name()))?;
        writeln!(v, "passed = {}", s.passed)?;
        writeln!(v, "detail = {}", q(&s.detail))?;
    }
    for (i, r) in verdict.member_ladders.iter().enumerate() {
        let c = &r.constants;
        writeln!(v, "\n[ladders.{}]", i + 1)?;
        writeln!(v, "passed = {}", r.verdict.passed())?;
        writeln!(v, "vacuous_from_n = {}", r.verdict.is_vacuous())?;
        writeln!(v, "min_R_origin = {}", num(r.verdict.min_origin))?;
        writeln!(v, "theta = {}", num(c.theta))?;
        writeln!(v, "beta = {}", num(c.beta))?;
        writeln!(v, "lambda = {}", num(c.lambda))?;
        writeln!(v, "c = {}", num(c.c))?;
        writeln!(v, "D = {}", num(c.d))?;
        writeln!(v, "C2 = {}", num(c.c2))?;
        writeln!(v, "C3 = {}", num(c.c3))?;
        writeln!(v, "delta = {}", num(c.delta))?;
        writeln!(v, "N = {}", c.n)?;
        writeln!(v, "tau = {}", num(c.tau))?;
    }
    // the verdict goes last so an interrupted run never leaves one behind
    out.text("verdict.toml", v);
    println!("{verdict}");
    out.commit(&cfg.output_dir)
}
