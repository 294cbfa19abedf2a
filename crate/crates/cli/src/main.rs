//! Experiment driver: deterministic artifact emission for the solver,
//! calibration, and inverse-problem pipelines.
//!
//! Every subcommand honours `--seed`, `--out` and `--threads`; identical
//! seed and configuration produce byte-identical data files (the
//! manifest records wall time and is the one exception). Exit codes:
//! 0 success, 1 failed checks or internal errors, 2 invalid
//! configuration or input, 3 solver non-convergence, 4 I/O errors.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("solver did not converge")]
    NonConverged,
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::NonConverged => 3,
            CliError::Io { .. } => 4,
            CliError::Internal(_) => 1,
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }
}

impl From<bayescg::solvers::SolverError> for CliError {
    fn from(e: bayescg::solvers::SolverError) -> Self {
        match e {
            bayescg::solvers::SolverError::InvalidConfig(msg) => CliError::Config(msg),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<bayescg::calibration::CalibrationError> for CliError {
    fn from(e: bayescg::calibration::CalibrationError) -> Self {
        use bayescg::calibration::CalibrationError as CE;
        match e {
            CE::InvalidConfig(msg) => CliError::Config(msg),
            CE::InsufficientSamples { .. } | CE::EmptySample | CE::InvalidDof(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<bayescg::inverse::InverseError> for CliError {
    fn from(e: bayescg::inverse::InverseError) -> Self {
        use bayescg::inverse::InverseError as IE;
        match e {
            IE::InvalidConfig(msg) | IE::Mesh(msg) => CliError::Config(msg),
            IE::NonConverged => CliError::NonConverged,
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<bayescg::matrix::MatrixError> for CliError {
    fn from(e: bayescg::matrix::MatrixError) -> Self {
        use bayescg::matrix::MatrixError as ME;
        match e {
            ME::Io(source) => CliError::Io { path: "<input>".into(), source },
            ME::Parse { .. } | ME::InvalidDimension(_) | ME::DimensionMismatch { .. } => {
                CliError::Config(e.to_string())
            }
            other => CliError::Internal(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "bayescg", version, about = "Probabilistic linear solvers with randomised postiterations")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Base seed for all randomness.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads; affects wall time only, never output bytes.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one linear system and write the outcome as JSON.
    Solve(commands::solve::SolveArgs),
    /// Run simulation-based calibration and write the rank report.
    Sbc(commands::sbc::SbcArgs),
    /// Sweep the SBC KS statistic over tolerance grids.
    KsSweep(commands::sweep::SweepArgs),
    /// Run the porous-medium inverse problem for several solvers.
    Inverse(commands::inverse::InverseArgs),
    /// Run the library's invariant suites.
    Selftest(commands::selftest::SelftestArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .expect("thread pool initialised once");
    }

    let result = match &cli.command {
        Command::Solve(args) => commands::solve::run(args, cli.seed, &cli.out),
        Command::Sbc(args) => commands::sbc::run(args, cli.seed, &cli.out),
        Command::KsSweep(args) => commands::sweep::run(args, cli.seed, &cli.out),
        Command::Inverse(args) => commands::inverse::run(args, cli.seed, &cli.out),
        Command::Selftest(args) => commands::selftest::run(args, cli.seed),
    };

    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
