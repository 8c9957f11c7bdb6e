use std::fmt::Write as _;

use anyhow::Result;
use clap::Args;
use rdt_lab::gromov_experiment::derive_constants;
use rdt_lab::heat_kernel::GaussianFit;

#[derive(Debug, Args)]
pub struct ConstantsArgs {
    #[arg(long, default_value_t = 0.19)]
    pub theta: f64,
    /// Gaussian width D of the heat kernel bound.
    #[arg(long, default_value_t = 4.5)]
    pub d: f64,
    /// Gaussian constant C2 of the heat kernel bound.
    #[arg(long, default_value_t = 1.0)]
    pub c2: f64,
    /// Curvature decay constant C3.
    #[arg(long, default_value_t = 0.01)]
    pub c3: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// Reject constants whose tau falls below 20 dx² for this spacing.
    #[arg(long)]
    pub dx: Option<f64>,
    /// Rungs listed after the header.
    #[arg(long, default_value_t = 12)]
    pub rows: usize,
}

/// Renders the ladder constants as text.
pub fn render(args: &ConstantsArgs) -> Result<String> {
    let fit = GaussianFit {
        c2: args.c2,
        c2_pointwise: args.c2,
        c2_tail: args.c2,
        d: args.d,
        valid_pairs: 0,
        table: Vec::new(),
    };
    let floor = args.dx.map(|dx| 20.0 * dx * dx);
    let c = derive_constants(args.theta, &fit, args.c3, args.delta, floor)?;
    let mut s = String::new();
    writeln!(s, "theta  {:.6}", c.theta)?;
    writeln!(s, "beta   {:.6}", c.beta)?;
    writeln!(s, "lambda {:.6}", c.lambda)?;
    writeln!(s, "c      {:.6e}", c.c)?;
    writeln!(s, "D      {}", c.d)?;
    writeln!(s, "C2     {}", c.c2)?;
    writeln!(s, "C3     {}", c.c3)?;
    writeln!(s, "delta  {}", c.delta)?;
    writeln!(s, "N      {}", c.n)?;
    writeln!(s, "tau    {:.6e}", c.tau)?;
    for (name, ok) in c.invariants() {
        writeln!(s, "invariant {name}: {}", if ok { "holds" } else { "VIOLATED" })?;
    }
    writeln!(s, "k,t_k,r_k,loss_k,tail_k")?;
    for k in 0..args.rows {
        writeln!(s, "{k},{:.6e},{:.6e},{:.6e},{:.6e}", c.t(k), c.r(k), c.loss(k), c.tail_sum(k))?;
    }
    Ok(s)
}

pub fn run(args: &ConstantsArgs) -> Result<()> {
    print!("{}", render(args)?);
    Ok(())
}
