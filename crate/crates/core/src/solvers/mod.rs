//! Conjugate gradients and its probabilistic extensions.
//!
//! Three solvers share one Krylov engine so that their iterates are
//! bit-identical wherever they are defined to coincide:
//!
//! * [`cg_solve`] — plain CG with a single relative-residual tolerance.
//! * [`pi_solve`] — deterministic postiterations: the mean stops at the
//!   first iterate within `eps1`, further iterations down to `eps2` only
//!   extend the low-rank covariance factor `L` (columns `alpha_k s_k`).
//! * [`rpi_solve`] — randomised postiterations: as PI, but each
//!   postiteration also perturbs the returned mean by
//!   `alpha_k (z_k + 1) s_k` with `z_k ~ N(0,1)`, which restores
//!   chi-squared calibration of the posterior `N(mean, L Lᵀ)`.
//!
//! [`z_statistic`] and [`whitened_error`] evaluate that posterior against
//! a known truth; [`bayescg_dense`] is the small-scale dense reference for
//! the general Gaussian-conditioning posterior.

mod engine;
mod posterior;
mod stats;

pub use posterior::{bayescg_dense, DensePosterior};
pub use stats::{posterior_variance_of, whitened_error, z_statistic, Z_RANK_TOL};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{MatrixError, SpdMatrix};
use crate::rng::{RngStream, StreamId};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("numerical breakdown at iteration {iteration}: {what}")]
    Breakdown { iteration: usize, what: String },
    #[error("low-rank factor is rank deficient: effective rank {rank} of {cols} columns")]
    RankDeficient { rank: usize, cols: usize },
    #[error("singular information operator")]
    SingularInformation,
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Tolerances and switches controlling a postiteration solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Relative residual tolerance ending the mean phase (defines `m`).
    pub eps1: f64,
    /// Relative residual tolerance ending the postiterations (defines `t`).
    pub eps2: f64,
    /// Iteration cap; `None` means `10 * d`.
    pub max_iter: Option<usize>,
    /// Full Gram-Schmidt reorthogonalisation of each new direction
    /// against all previous ones. Off by default: this is the standard
    /// CG cost model; tests of exact-arithmetic identities switch it on.
    pub reorthogonalise: bool,
    /// Keep all search directions in the trace.
    pub retain_directions: bool,
    /// Additionally record the recomputed true residual `‖b - A x_k‖`
    /// alongside the recursion residual, for drift monitoring.
    pub track_true_residual: bool,
}

impl SolverConfig {
    pub fn new(eps1: f64, eps2: f64) -> Result<Self, SolverError> {
        let cfg = SolverConfig {
            eps1,
            eps2,
            max_iter: None,
            reorthogonalise: false,
            retain_directions: false,
            track_true_residual: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets `eps2 = delta * eps1` for `0 < delta < 1`.
    pub fn with_delta(eps1: f64, delta: f64) -> Result<Self, SolverError> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(SolverError::InvalidConfig(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        Self::new(eps1, delta * eps1)
    }

    pub fn reorthogonalised(mut self) -> Self {
        self.reorthogonalise = true;
        self
    }

    pub fn retaining_directions(mut self) -> Self {
        self.retain_directions = true;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = Some(max_iter);
        self
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.eps1 > 0.0 && self.eps1.is_finite()) {
            return Err(SolverError::InvalidConfig(format!("eps1 must be positive, got {}", self.eps1)));
        }
        if !(self.eps2 > 0.0 && self.eps2.is_finite()) {
            return Err(SolverError::InvalidConfig(format!("eps2 must be positive, got {}", self.eps2)));
        }
        if self.eps2 > self.eps1 {
            return Err(SolverError::InvalidConfig(format!(
                "eps2 ({}) must not exceed eps1 ({})",
                self.eps2, self.eps1
            )));
        }
        if self.max_iter == Some(0) {
            return Err(SolverError::InvalidConfig("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-iteration record of the Krylov recursion, `k = 1..t`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct KrylovTrace {
    /// Step sizes `alpha_k = r_{k-1}ᵀr_{k-1} / s_kᵀA s_k`.
    pub alphas: Vec<f64>,
    /// `beta_k = r_kᵀr_k / r_{k-1}ᵀr_{k-1}`.
    pub betas: Vec<f64>,
    /// Conjugacy quantities `s_kᵀ A s_k`.
    pub s_a_s: Vec<f64>,
    /// Scalings `psi_k = r_{k-1}ᵀr_{k-1} / (s_kᵀA s_k)^{1/2}`.
    pub psis: Vec<f64>,
    /// Recursion residual norms `‖r_k‖`, k = 0..t (length t+1).
    pub residual_norms: Vec<f64>,
    /// Unnormalised directions `s_k`, kept only on request.
    pub directions: Option<Vec<Vec<f64>>>,
    /// Recomputed `‖b - A x_k‖`, kept only on request.
    pub true_residual_norms: Option<Vec<f64>>,
    pub converged: bool,
}

impl KrylovTrace {
    /// Number of iterations recorded.
    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }
}

/// Low-rank covariance factor `L` with columns `alpha_k s_k`; the
/// posterior covariance is `L Lᵀ`, never formed explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowRankFactor {
    rows: usize,
    cols: usize,
    /// Column-major buffer of shape (rows, cols).
    data: Vec<f64>,
}

impl LowRankFactor {
    pub fn empty(rows: usize) -> Self {
        LowRankFactor { rows, cols: 0, data: Vec::new() }
    }

    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Self {
        let mut f = Self::empty(rows);
        for c in columns {
            f.push_column(c);
        }
        f
    }

    pub fn push_column(&mut self, col: &[f64]) {
        assert_eq!(col.len(), self.rows);
        self.data.extend_from_slice(col);
        self.cols += 1;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.data[k * self.rows..(k + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.cols).map(|k| self.column(k))
    }

    /// `Lᵀ w`.
    pub fn transpose_apply(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.rows);
        self.columns().map(|c| crate::vecops::dot(c, w)).collect()
    }

    /// `L c`.
    pub fn apply(&self, c: &[f64]) -> Vec<f64> {
        assert_eq!(c.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for (k, col) in self.columns().enumerate() {
            crate::vecops::axpy(c[k], col, &mut out);
        }
        out
    }

    pub fn to_dmatrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_column_slice(self.rows, self.cols, &self.data)
    }

    pub fn col_major_data(&self) -> &[f64] {
        &self.data
    }
}

/// Result of a postiteration solve: posterior mean, low-rank covariance
/// factor, and the phase boundaries `m` (mean iterations) and `t`
/// (total iterations, so `L` has `t - m` columns).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub mean: Vec<f64>,
    pub low_rank_factor: LowRankFactor,
    pub m: usize,
    pub t: usize,
    /// `‖r_k‖` for k = 0..t.
    pub residual_history: Vec<f64>,
    pub trace: KrylovTrace,
    pub converged: bool,
    /// Stream identity of the randomisation draws, when any were used.
    pub seed: Option<StreamId>,
}

/// Plain conjugate gradients.
///
/// Returns the iterate once `‖r_k‖ <= eps * ‖b‖` together with the full
/// recursion trace. Hitting the iteration cap is not an error; it is
/// flagged on the trace.
pub fn cg_solve(
    a: &SpdMatrix,
    b: &[f64],
    x0: &[f64],
    eps: f64,
    max_iter: Option<usize>,
) -> Result<(Vec<f64>, KrylovTrace), SolverError> {
    let mut cfg = SolverConfig::new(eps, eps)?;
    cfg.max_iter = max_iter;
    let out = engine::run(a, b, x0, &cfg, engine::MeanUpdate::Deterministic)?;
    Ok((out.mean, out.trace))
}

/// CG variant exposing the engine configuration (reorthogonalisation,
/// direction retention) for validation work.
pub fn cg_solve_with_config(
    a: &SpdMatrix,
    b: &[f64],
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<SolveOutcome, SolverError> {
    let mut cg_cfg = cfg.clone();
    cg_cfg.eps2 = cg_cfg.eps1;
    engine::run(a, b, x0, &cg_cfg, engine::MeanUpdate::Deterministic)
}

/// Deterministic postiterations.
///
/// The returned mean is the CG iterate at the `eps1` stop; iterations
/// continue to `eps2` purely to accumulate the covariance factor.
pub fn pi_solve(
    a: &SpdMatrix,
    b: &[f64],
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<SolveOutcome, SolverError> {
    engine::run(a, b, x0, cfg, engine::MeanUpdate::Deterministic)
}

/// Randomised postiterations.
///
/// Identical to [`pi_solve`] in its CG recursion; each postiteration
/// additionally moves the returned mean by `alpha_k (z_k + 1) s_k` with
/// `z_k ~ N(0,1)` drawn from `rng`.
pub fn rpi_solve(
    a: &SpdMatrix,
    b: &[f64],
    x0: &[f64],
    cfg: &SolverConfig,
    rng: &mut RngStream,
) -> Result<SolveOutcome, SolverError> {
    let seed = rng.id();
    let mut draw = || rng.normal();
    let mut out = engine::run(a, b, x0, cfg, engine::MeanUpdate::Randomised(&mut draw))?;
    out.seed = Some(seed);
    Ok(out)
}

/// Randomised postiterations with caller-supplied perturbation draws;
/// the reproducibility seam used by tests (`z_k = 0` recovers the plain
/// CG iterate at `t`).
pub fn rpi_solve_with_draws(
    a: &SpdMatrix,
    b: &[f64],
    x0: &[f64],
    cfg: &SolverConfig,
    draw: &mut dyn FnMut() -> f64,
) -> Result<SolveOutcome, SolverError> {
    engine::run(a, b, x0, cfg, engine::MeanUpdate::Randomised(draw))
}
