use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::ValueEnum;
use serde::Serialize;

use bayescg::matrix::{load_matrix, load_vector, sample_spd_exp, SpdMatrix};
use bayescg::rng::{RngStream, StreamId};
use bayescg::solvers::{pi_solve, rpi_solve, SolveOutcome, SolverConfig};

use crate::manifest::{ensure_out_dir, write_file, ManifestBuilder};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Cg,
    Pi,
    Rpi,
}

impl MethodArg {
    fn name(&self) -> &'static str {
        match self {
            MethodArg::Cg => "cg",
            MethodArg::Pi => "pi",
            MethodArg::Rpi => "rpi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    /// Identity matrix of dimension `--d`.
    Identity,
    /// Random SPD test matrix (Haar-rotated Exp(1) spectrum).
    Spd,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct SolveArgs {
    /// Matrix file in triplet format ("d nnz" header, "i j value" lines).
    #[arg(long, conflicts_with = "generator")]
    matrix: Option<PathBuf>,

    /// Generate the matrix instead of loading one.
    #[arg(long = "gen", value_enum)]
    generator: Option<Generator>,

    /// Dimension for generated matrices.
    #[arg(long, default_value_t = 100)]
    d: usize,

    /// Right-hand side: a file path, "ones", or "random".
    #[arg(long, default_value = "ones")]
    b: String,

    #[arg(long, value_enum, default_value_t = MethodArg::Cg)]
    method: MethodArg,

    /// Single tolerance (sets eps1 = eps2).
    #[arg(long)]
    eps: Option<f64>,

    /// Mean-phase tolerance.
    #[arg(long)]
    eps1: Option<f64>,

    /// Postiteration tolerance.
    #[arg(long, conflicts_with = "delta")]
    eps2: Option<f64>,

    /// Sets eps2 = delta * eps1.
    #[arg(long)]
    delta: Option<f64>,

    #[arg(long)]
    max_iter: Option<usize>,

    /// Reorthogonalise new directions against all previous ones.
    #[arg(long)]
    reorth: bool,
}

/// The solve outcome in its document form: mean, the factor as a
/// column-major buffer with shape, phase boundaries, residual history.
#[derive(Serialize)]
struct OutcomeDocument<'a> {
    mean: &'a [f64],
    low_rank_factor: FactorDocument<'a>,
    m: usize,
    t: usize,
    residual_history: &'a [f64],
    converged: bool,
    seed: Option<StreamId>,
}

#[derive(Serialize)]
struct FactorDocument<'a> {
    rows: usize,
    cols: usize,
    data_col_major: &'a [f64],
}

impl<'a> From<&'a SolveOutcome> for OutcomeDocument<'a> {
    fn from(out: &'a SolveOutcome) -> Self {
        OutcomeDocument {
            mean: &out.mean,
            low_rank_factor: FactorDocument {
                rows: out.low_rank_factor.rows(),
                cols: out.low_rank_factor.ncols(),
                data_col_major: out.low_rank_factor.col_major_data(),
            },
            m: out.m,
            t: out.t,
            residual_history: &out.residual_history,
            converged: out.converged,
            seed: out.seed,
        }
    }
}

fn resolve_matrix(args: &SolveArgs, seed: u64) -> Result<SpdMatrix, CliError> {
    if let Some(path) = &args.matrix {
        return Ok(load_matrix(path)?);
    }
    match args.generator {
        Some(Generator::Identity) => {
            if args.d == 0 {
                return Err(CliError::Config("dimension must be positive".into()));
            }
            Ok(SpdMatrix::identity(args.d))
        }
        Some(Generator::Spd) => Ok(sample_spd_exp(args.d, &mut RngStream::new(seed, 0))?),
        None => Err(CliError::Config("provide either --matrix FILE or --gen identity|spd".into())),
    }
}

fn resolve_rhs(spec: &str, d: usize, seed: u64) -> Result<Vec<f64>, CliError> {
    match spec {
        "ones" => Ok(vec![1.0; d]),
        "random" => Ok(RngStream::new(seed, 1).normal_vec(d)),
        path => {
            let v = load_vector(Path::new(path))?;
            if v.len() != d {
                return Err(CliError::Config(format!(
                    "right-hand side has length {}, matrix dimension is {d}",
                    v.len()
                )));
            }
            Ok(v)
        }
    }
}

fn resolve_solver_config(args: &SolveArgs) -> Result<SolverConfig, CliError> {
    let eps1 = args.eps1.or(args.eps).unwrap_or(1e-8);
    let mut cfg = match (args.eps2, args.delta) {
        (Some(eps2), _) => SolverConfig::new(eps1, eps2)?,
        (None, Some(delta)) => SolverConfig::with_delta(eps1, delta)?,
        (None, None) => SolverConfig::new(eps1, args.eps.unwrap_or(eps1))?,
    };
    cfg.max_iter = args.max_iter;
    cfg.reorthogonalise = args.reorth;
    if args.method == MethodArg::Cg {
        cfg.eps2 = cfg.eps1;
    }
    Ok(cfg)
}

pub fn run(args: &SolveArgs, seed: u64, out_dir: &Path) -> Result<ExitCode, CliError> {
    ensure_out_dir(out_dir)?;
    let mut manifest = ManifestBuilder::new("solve", super::to_config_value(args), seed);

    let a = resolve_matrix(args, seed)?;
    let b = resolve_rhs(&args.b, a.dim(), seed)?;
    let cfg = resolve_solver_config(args)?;

    let x0 = vec![0.0; a.dim()];
    let outcome = match args.method {
        MethodArg::Rpi => rpi_solve(&a, &b, &x0, &cfg, &mut RngStream::new(seed, 2))?,
        _ => pi_solve(&a, &b, &x0, &cfg)?,
    };

    let path = out_dir.join("outcome.json");
    let doc = OutcomeDocument::from(&outcome);
    let body = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Internal(e.to_string()))?;
    write_file(&path, &body)?;
    manifest.add_output(&path);
    manifest.write(out_dir)?;

    println!(
        "{}: d = {}, m = {}, t = {}, converged = {}, final residual = {:.3e}",
        args.method.name(),
        a.dim(),
        outcome.m,
        outcome.t,
        outcome.converged,
        outcome.residual_history.last().copied().unwrap_or(f64::NAN)
    );

    if outcome.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        Err(CliError::NonConverged)
    }
}
