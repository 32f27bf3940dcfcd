use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use conelab::cli::{execute, exit, exit_code, Experiment, RunConfig};

/// Numerical laboratory for cone-coordinate blowup solutions.
#[derive(Parser)]
#[command(name = "conelab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// INI configuration; defaults apply to anything not set.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `[output] dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed (overrides `[output] seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory read by `diagnose` (overrides `[diagnose] input`).
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Suppress the summary line.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Identity and bound checks of the geometry, kernels and transform.
    Verify,
    /// March the transformed equation and record the center trajectory.
    Run,
    /// Viscosity sweep over the configured horizons.
    Sweep,
    /// Blowup fit and forcing norms from a stored run.
    Diagnose,
    /// Symbolic-numeric audit of the transformed coefficients.
    Audit,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(p) => match RunConfig::from_file(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("conelab: {e}");
                return ExitCode::from(exit_code(&e) as u8);
            }
        },
        None => RunConfig::default(),
    };
    cfg.experiment = match cli.command {
        Command::Verify => Experiment::Verify,
        Command::Run => Experiment::Run,
        Command::Sweep => Experiment::Sweep,
        Command::Diagnose => Experiment::Diagnose,
        Command::Audit => Experiment::Audit,
    };
    if let Some(o) = cli.out {
        cfg.output_dir = o;
    }
    if let Some(i) = cli.input {
        cfg.input_dir = Some(i);
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match execute(&cfg) {
        Ok(outcome) => {
            if !cli.quiet {
                println!("{}", outcome.summary);
                let snapshots = outcome.files.iter().filter(|f| f.extension().is_some_and(|e| e == "cw")).count();
                for f in outcome.files.iter().filter(|f| f.extension().is_none_or(|e| e != "cw")) {
                    println!("  wrote {}", f.display());
                }
                if snapshots > 0 {
                    println!("  wrote {snapshots} snapshots");
                }
            }
            ExitCode::from(if outcome.pass { exit::SUCCESS } else { exit::CHECK_FAILURE } as u8)
        }
        Err(e) => {
            eprintln!("conelab: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
