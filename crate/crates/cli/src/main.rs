//! `dmera`: reproducible experiment runner.
//!
//! Every command reads an optional TOML config, applies flag overrides,
//! runs deterministically from the root seed and writes its outputs,
//! each embedding the resolved config and its SHA-256 hash, to the output
//! directory.
//!
//! Exit codes: 0 success, 1 I/O or internal error, 2 invalid config,
//! 3 feasibility guard, 4 verification failure.

mod assignment;
mod config;
mod noise_table;
mod optimize;
mod output;
mod spectral;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::CliError;

#[derive(Parser)]
#[command(name = "dmera", version, about = "Noise, optimization and scheduling experiments on DMERA circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trace distance between ideal and noisy target states per depth.
    NoiseTable(Common),
    /// Variational optimization of a TFIM circuit or the quadratic benchmark.
    Optimize(Common),
    /// Qubit-reuse tables, schedule export and verification.
    Assignment(Common),
    /// Transfer-operator spectra, noise bounds and scale saturation.
    Spectral(Common),
}

/// Flags shared by every command.
#[derive(Args, Clone, Debug)]
pub struct Common {
    /// TOML config; missing keys take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Root seed, overriding the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, f): (&Common, fn(&Common) -> Result<(), CliError>) = match &cli.command {
        Command::NoiseTable(c) => (c, noise_table::run),
        Command::Optimize(c) => (c, optimize::run),
        Command::Assignment(c) => (c, assignment::run),
        Command::Spectral(c) => (c, spectral::run),
    };
    if common.workers == 0 {
        return Err(CliError::config("--workers must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.workers)
        .build()
        .map_err(|e| CliError::internal(e.to_string()))?;
    pool.install(|| f(common))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
