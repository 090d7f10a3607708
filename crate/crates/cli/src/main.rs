//! `transport-spectra <command> --config <path> --out <dir> [--threads N] [--seed S]`
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid configuration, 3 resource limit,
//! 4 numerical failure.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use thiserror::Error;

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Sample F_k over phase space and report the spectral bound.
    Spectrum,
    /// Streaming semigroup U(t) applied to the initial data.
    Evolve,
    /// Closed-form resolvent against the Laplace transform of U(t), plus the trace condition.
    ResolventVerify,
    /// Truncated Dyson–Phillips expansion of the perturbed semigroup.
    Dyson,
    /// Norms of the averaged reflection kernel over a list of β.
    RlScan,
    /// Invariant suite over the library.
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Evolve => "evolve",
            Command::ResolventVerify => "resolvent-verify",
            Command::Dyson => "dyson",
            Command::RlScan => "rl-scan",
            Command::Selftest => "selftest",
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "transport-spectra",
    version,
    about = "Spectra and semigroups of linear transport with bounce-back boundaries"
)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration; optional for `selftest`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Error)]
pub enum Failure {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl Failure {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::Io(format!("{}: {e}", path.display()))
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Resource(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }
}

fn main_inner(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Resource(e.to_string()))?;
    }
    let cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            Some(RunConfig::from_json(&text)?)
        }
        None => None,
    };
    std::fs::create_dir_all(&cli.out).map_err(|e| Failure::io(&cli.out, e))?;
    commands::run(cli.command, cfg.as_ref(), &cli.out, cli.seed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("transport-spectra: {e}");
            ExitCode::from(e.code())
        }
    }
}
