use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use commands::{constants, curvature, flow, gromov, kernel};

/// Numerical laboratory for the Ricci DeTurck flow and scalar curvature lower bounds.
#[derive(Debug, Parser)]
#[command(name = "rdt-lab", version)]
struct Cli {
    /// TOML file with the subcommand's parameters; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Curvature of an initial metric.
    Curvature(curvature::CurvatureArgs),
    /// Ricci DeTurck flow with per-record diagnostics.
    Flow(flow::FlowArgs),
    /// Conjugate heat kernel at the origin and its Gaussian bound.
    Kernel(kernel::KernelArgs),
    /// Limit experiment on a metric family.
    Gromov(gromov::GromovArgs),
    /// Ladder constants for given theta, D, C2, C3 and delta.
    Constants(constants::ConstantsArgs),
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("RDT_LAB_THREADS") {
        let n: usize = v.parse().with_context(|| format!("RDT_LAB_THREADS = {v:?} is not a count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    let cfg = cli.config.as_deref();
    let written = match &cli.command {
        Command::Curvature(a) => curvature::run(cfg, a)?,
        Command::Flow(a) => flow::run(cfg, a)?,
        Command::Kernel(a) => kernel::run(cfg, a)?,
        Command::Gromov(a) => gromov::run(cfg, a)?,
        Command::Constants(a) => return constants::run(a),
    };
    for p in written {
        log::info!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
