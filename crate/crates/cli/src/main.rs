//! Command-line front end for the OAM Raman memory library.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Context;
use crate::config::{RunConfig, ScanPreset};
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "oam-memory", version, about = "Raman memory for light with orbital angular momentum")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (or file stem for multi-file outputs).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Mode area convention: quarter or half.
    #[arg(long, global = true)]
    convention: Option<String>,
    /// Overlap normalization fed to the kernels: appendix or maintext.
    #[arg(long = "chi-norm", global = true)]
    chi_norm: Option<String>,
    /// Cycle engine: kernel, pde or both.
    #[arg(long, global = true)]
    engine: Option<String>,
    /// Reserved; all computations are deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Overlap coefficients against the drive waist offset (CSV).
    ScanChi {
        #[arg(long, value_enum)]
        preset: Option<ScanPreset>,
    },
    /// Full-cycle kernel as binary + JSON sidecar, with its singular spectrum.
    Kernel,
    /// One write/store/read cycle (JSON report).
    Cycle,
    /// Cycle through the direct integrator only (pulse and state CSV).
    Simulate,
    /// Cell size conditions with margins.
    CheckGeometry,
    /// Grid search for the cell length and write time.
    Optimize,
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        config.output.path = Some(out.clone());
    }
    if let Some(v) = &cli.convention {
        config.conventions.area = v.parse().map_err(|e| CliError::Config(format!("`--convention`: {e}")))?;
    }
    if let Some(v) = &cli.chi_norm {
        config.conventions.chi_norm = v.parse().map_err(|e| CliError::Config(format!("`--chi-norm`: {e}")))?;
    }
    if let Some(v) = &cli.engine {
        config.cycle.engine = v.parse().map_err(|e| CliError::Config(format!("`--engine`: {e}")))?;
    }
    if let Command::ScanChi { preset: Some(p) } = &cli.command {
        config.scan = p.scan();
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let ctx = Context::new(load(cli)?);
    match cli.command {
        Command::ScanChi { .. } => commands::scan_chi(&ctx),
        Command::Kernel => commands::kernel(&ctx),
        Command::Cycle => commands::cycle(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::CheckGeometry => commands::check_geometry(&ctx),
        Command::Optimize => commands::optimize(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
