use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use capdrop_cli::commands::elapsed;
use capdrop_cli::{dispatch, parse_config, CliError, Command, Options};
use clap::{Args, Parser, Subcommand};

/// Equilibrium, stability and relaxation numerics for a 2-D sessile drop.
#[derive(Parser)]
#[command(name = "capdrop", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Equilibrium profile by eps-continuation.
    Equilibrate(Common),
    /// Continuation report over the eps schedule.
    SweepEps(Common),
    /// Constrained spectrum of the (1, Sigma) form.
    Spectrum(Common),
    /// Q, xi_5 and xi_6 with the kernel residuals.
    Kernel(Common),
    /// Moving-frame recentring of a perturbed, shifted drop.
    Recentre(Common),
    /// Gradient-flow relaxation from a perturbed drop.
    Relax(Common),
    /// Run the invariant suite and write a pass/fail report.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file with [params], [grid] and [run] sections.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write SVG plots.
    #[arg(long)]
    plots: bool,
    /// Seed for random perturbations; overrides `seed` in [run].
    #[arg(long)]
    seed: Option<u64>,
}

fn execute(cmd: Command, common: Common) -> Result<Vec<PathBuf>, CliError> {
    let text = fs::read_to_string(&common.config)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", common.config.display())))?;
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    dispatch(cmd, &cfg, &Options { out: common.out, plots: common.plots })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (cmd, common) = match cli.command {
        Cmd::Equilibrate(c) => (Command::Equilibrate, c),
        Cmd::SweepEps(c) => (Command::SweepEps, c),
        Cmd::Spectrum(c) => (Command::Spectrum, c),
        Cmd::Kernel(c) => (Command::Kernel, c),
        Cmd::Recentre(c) => (Command::Recentre, c),
        Cmd::Relax(c) => (Command::Relax, c),
        Cmd::Verify(c) => (Command::Verify, c),
    };
    let start = Instant::now();
    match execute(cmd, common) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            eprintln!("{} finished in {}", cmd.name(), elapsed(start));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("capdrop {}: {e}", cmd.name());
            ExitCode::from(e.exit_code())
        }
    }
}
