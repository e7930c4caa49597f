//! `barrier`: calibrate smiles, read off densities, price barrier products
//! and estimate breach-and-recover ratios from the command line.

mod artifacts;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use barrier_core::PricingError;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use thiserror::Error;

use commands::*;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] PricingError),
    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid JSON in {}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) if e.is_domain() => "domain",
            CliError::Core(PricingError::Validation(_)) => "validation",
            CliError::Core(PricingError::Parse { .. }) => "parse",
            CliError::Core(PricingError::Io { .. }) | CliError::Io { .. } => "io",
            CliError::Core(PricingError::Config(_)) | CliError::Usage(_) => "usage",
            CliError::Core(_) => "domain",
            CliError::Json { .. } => "parse",
        }
    }

    /// 1 for numerical/domain failures, 2 for usage and IO.
    fn exit_code(&self) -> u8 {
        match self.kind() {
            "domain" | "validation" => 1,
            _ => 2,
        }
    }

    fn path(&self) -> Option<String> {
        match self {
            CliError::Io { path, .. } | CliError::Json { path, .. } | CliError::Core(PricingError::Io { path, .. }) => {
                Some(path.display().to_string())
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "barrier", version, about = "Smile calibration and barrier-product pricing")]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Directory for outputs without an explicit path.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// What to echo on stdout.
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a smile model to every maturity of an option chain.
    Calibrate(CalibrateArgs),
    /// Terminal density implied by calibrated parameters.
    Density(DensityArgs),
    /// Price a bonus certificate or barrier reverse convertible.
    Price(PriceArgs),
    /// Monte Carlo barrier statistics under local-volatility dynamics.
    Simulate(SimulateArgs),
    /// Summarise parameters, simulation and price outputs.
    Report(ReportArgs),
}

pub struct Global {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub format: Format,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = Global {
        seed: cli.seed,
        out_dir: cli.out_dir,
        format: cli.format,
    };
    let out = match &cli.command {
        Command::Calibrate(a) => cmd_calibrate(&g, a)?,
        Command::Density(a) => cmd_density(&g, a)?,
        Command::Price(a) => cmd_price(&g, a)?,
        Command::Simulate(a) => cmd_simulate(&g, a)?,
        Command::Report(a) => cmd_report(&g, a)?,
    };
    for (path, text) in &out.files {
        artifacts::write_text(path, text)?;
    }
    match g.format {
        Format::Json => print!("{}", out.json),
        Format::Csv => print!("{}", out.csv),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = json!({
                "error": {
                    "kind": e.kind(),
                    "message": e.to_string(),
                    "path": e.path(),
                }
            });
            eprintln!("{body}");
            ExitCode::from(e.exit_code())
        }
    }
}
