use std::path::PathBuf;

use clap::Args;

use crate::config::{GridConfig, MetricSpec};

pub mod constants;
pub mod curvature;
pub mod flow;
pub mod gromov;
pub mod kernel;

#[derive(Debug, Args, Default)]
pub struct GridArgs {
    #[arg(long)]
    pub dim: Option<usize>,
    /// Points per axis.
    #[arg(long)]
    pub n_ax: Option<usize>,
    /// Box side L.
    #[arg(long)]
    pub side: Option<f64>,
    /// Grid spacing; overrides the side.
    #[arg(long)]
    pub dx: Option<f64>,
}

impl GridArgs {
    pub fn apply(&self, g: &mut GridConfig) {
        if let Some(v) = self.dim {
            g.dim = v;
        }
        if let Some(v) = self.n_ax {
            g.n_ax = v;
        }
        if let Some(v) = self.side {
            g.side = v;
            g.dx = None;
        }
        if self.dx.is_some() {
            g.dx = self.dx;
        }
    }
}

#[derive(Debug, Args, Default)]
pub struct MetricArgs {
    /// flat, conformal-sine, conformal-bump or random.
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub amp: Option<f64>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub modes: Option<usize>,
}

impl MetricArgs {
    pub fn apply(&self, m: &mut MetricSpec) -> anyhow::Result<()> {
        if let Some(kind) = &self.metric {
            *m = MetricSpec::from_flags(kind, self.amp, self.radius, self.modes)?;
            return Ok(());
        }
        match m {
            MetricSpec::Flat => {}
            MetricSpec::ConformalSine { amp } => {
                *amp = self.amp.unwrap_or(*amp);
            }
            MetricSpec::ConformalBump { amp, radius } => {
                *amp = self.amp.unwrap_or(*amp);
                *radius = self.radius.unwrap_or(*radius);
            }
            MetricSpec::Random { amp, modes } => {
                *amp = self.amp.unwrap_or(*amp);
                *modes = self.modes.unwrap_or(*modes);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Args, Default)]
pub struct OutputArgs {
    /// Seed of the one random generator used by the run.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short = 'o')]
    pub output_dir: Option<PathBuf>,
}

impl OutputArgs {
    pub fn apply(&self, seed: &mut u64, dir: &mut PathBuf) {
        if let Some(s) = self.seed {
            *seed = s;
        }
        if let Some(d) = &self.output_dir {
            *dir = d.clone();
        }
    }
}

pub(crate) fn set<T: Clone>(target: &mut T, flag: &Option<T>) {
    if let Some(v) = flag {
        *target = v.clone();
    }
}
