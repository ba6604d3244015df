mod commands;
mod config;
mod error;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ionspin::couplings::ThreeSpinVariant;

use crate::commands::Context;
use crate::error::CliError;

/// Trapped-ion simulator for competing two- and three-spin interactions.
#[derive(Debug, Parser)]
#[command(name = "ionspin", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration (JSON), or a scan metadata file to rerun.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for scans; defaults to the available parallelism.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Seed for randomized checks and solver start vectors.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Three-spin coupling formula: eq6-literal or eq6-corrected.
    #[arg(long, global = true, value_parser = parse_variant)]
    variant: Option<ThreeSpinVariant>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normal-mode table per axis.
    Modes,
    /// Device-derived couplings with estimates, error budget and fit.
    Couplings,
    /// Ground energy, degeneracy, gap and order parameters.
    Ground,
    /// Phase-diagram scan over (J2, J3).
    Scan,
    /// Adiabatic ramp time series.
    Ramp,
    /// Cross-check the solvers against independent oracles.
    Verify {
        /// Offset injected into the solver-side fixtures.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        perturb: f64,
        /// Largest chain used by the dense oracles.
        #[arg(long, default_value_t = 8)]
        n_max: usize,
    },
}

fn parse_variant(s: &str) -> Result<ThreeSpinVariant, String> {
    s.parse().map_err(|e: ionspin::Error| e.to_string())
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Command::Verify { perturb, n_max } = cli.command {
        let checks = verify::run(n_max, perturb, cli.seed)?;
        for c in &checks {
            println!("{}", c.line());
        }
        let failed = checks.iter().filter(|c| !c.passed()).count();
        return if failed == 0 {
            Ok(())
        } else {
            Err(CliError::VerifyFailed { failed, total: checks.len() })
        };
    }

    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::validation("--config is required for this command"))?;
    let loaded = config::load(path)?;
    let ctx = Context {
        out_dir: commands::output_dir(cli.out.as_deref(), Some(&loaded.config)),
        prefix: loaded.config.output.prefix.clone(),
        workers: cli.workers,
        seed: cli.seed,
        variant: cli.variant.or(loaded.recorded_variant).unwrap_or_default(),
    };
    let written = match cli.command {
        Command::Modes => commands::modes(&loaded, &ctx)?,
        Command::Couplings => commands::couplings(&loaded, &ctx)?,
        Command::Ground => commands::ground(&loaded, &ctx)?,
        Command::Scan => commands::scan(&loaded, &ctx)?,
        Command::Ramp => commands::ramp(&loaded, &ctx)?,
        Command::Verify { .. } => unreachable!(),
    };
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are validation failures; help and version are not errors
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
