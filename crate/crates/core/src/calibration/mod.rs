//! Statistical testing of solver calibration.
//!
//! The central diagnostic is simulation-based calibration: draw a truth
//! from the prior `N(0, A⁻¹)`, simulate `b = A x`, run a probabilistic
//! solver, and score the truth under the returned posterior through
//!
//! ```text
//! t_i = Phi( wᵀ(mean - x) / sqrt(wᵀ L Lᵀ w) )
//! ```
//!
//! Calibrated posteriors make the `t_i` uniform on [0, 1]; the
//! Kolmogorov-Smirnov statistic quantifies the departure, and
//! [`ks_sweep`] maps it over tolerance grids with replicated runs.

mod special;

pub use special::{chi2_cdf, gamma_p, gamma_q, ln_gamma, standard_normal_cdf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{sample_spd_exp, MatrixError, SpdFactor};
use crate::rng::{derive_seed, RngStream, RNG_ALGORITHM};
use crate::solvers::{pi_solve, posterior_variance_of, rpi_solve, z_statistic, SolveOutcome, SolverConfig, SolverError};
use crate::vecops::{norm2, quantile, sub};

/// Posterior variances at or below this are counted as degenerate and
/// the replicate is excluded from the rank sample.
pub const DEGENERATE_VARIANCE: f64 = 1e-300;

/// Asymptotic 1% critical value of the KS statistic for sample size `n`.
pub fn ks_critical_value_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("empty sample")]
    EmptySample,
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("sample value {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("invalid degrees of freedom {0}")]
    InvalidDof(usize),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Which solver an SBC run exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    /// Plain CG at `eps2`: no postiterations, so every replicate is
    /// degenerate; kept as the negative control.
    Cg,
    Pi,
    Rpi,
}

impl SolveMethod {
    pub fn name(&self) -> &'static str {
        match self {
            SolveMethod::Cg => "cg",
            SolveMethod::Pi => "pi",
            SolveMethod::Rpi => "rpi",
        }
    }
}

/// Test vector for the rank statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestVector {
    /// A unit vector drawn once per run from the run's seed.
    RandomUnit,
    Fixed(Vec<f64>),
}

/// Whether sweep replicates share one matrix or redraw it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixPolicy {
    FixedPerRun,
    RedrawnPerReplicate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SbcConfig {
    pub dim: usize,
    pub n_sim: usize,
    pub eps1: f64,
    pub eps2: f64,
    pub method: SolveMethod,
    pub test_vector: TestVector,
    pub histogram_bins: usize,
    /// Record the Z-statistic of each replicate alongside its rank.
    pub record_z: bool,
    pub seed: u64,
    /// Draw the matrix from this seed instead of `seed`; lets sweep
    /// replicates share one matrix under [`MatrixPolicy::FixedPerRun`].
    pub matrix_seed: Option<u64>,
}

impl SbcConfig {
    pub fn new(dim: usize, n_sim: usize, eps1: f64, eps2: f64, method: SolveMethod, seed: u64) -> Self {
        SbcConfig {
            dim,
            n_sim,
            eps1,
            eps2,
            method,
            test_vector: TestVector::RandomUnit,
            histogram_bins: 20,
            record_z: false,
            seed,
            matrix_seed: None,
        }
    }

    fn validate(&self) -> Result<(), CalibrationError> {
        if self.dim == 0 {
            return Err(CalibrationError::InvalidConfig("dimension must be positive".into()));
        }
        if self.n_sim == 0 {
            return Err(CalibrationError::InvalidConfig("n_sim must be at least 1".into()));
        }
        if self.histogram_bins == 0 {
            return Err(CalibrationError::InvalidConfig("histogram needs at least one bin".into()));
        }
        SolverConfig::new(self.eps1, self.eps2)?;
        if let TestVector::Fixed(w) = &self.test_vector {
            if w.len() != self.dim {
                return Err(CalibrationError::InvalidConfig(format!(
                    "test vector has length {}, expected {}",
                    w.len(),
                    self.dim
                )));
            }
            if norm2(w) == 0.0 || !crate::vecops::all_finite(w) {
                return Err(CalibrationError::InvalidConfig("test vector must be finite and nonzero".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges spanning [0, 1].
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    fn from_unit_samples(samples: &[f64], bins: usize) -> Histogram {
        let edges: Vec<f64> = (0..=bins).map(|i| i as f64 / bins as f64).collect();
        let mut counts = vec![0usize; bins];
        for &s in samples {
            let mut idx = (s * bins as f64).floor() as usize;
            if idx >= bins {
                idx = bins - 1; // s == 1.0 lands in the last bin
            }
            counts[idx] += 1;
        }
        Histogram { edges, counts }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub config: SbcConfig,
    /// The test vector actually used.
    pub test_vector: Vec<f64>,
    pub rng_algorithm: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationReport {
    /// Rank statistics `t_i`, in simulation order, degenerate runs excluded.
    pub ranks: Vec<f64>,
    /// KS distance of the ranks from U(0, 1); NaN when no ranks survive.
    pub ks_statistic: f64,
    pub histogram: Histogram,
    pub z_samples: Option<Vec<f64>>,
    /// Replicates excluded for (near-)zero posterior variance in `w`.
    pub degenerate: usize,
    pub metadata: ReportMetadata,
}

/// The SBC rank statistic for one replicate.
pub fn sbc_rank(w: &[f64], mean: &[f64], x_true: &[f64], variance: f64) -> f64 {
    let num = crate::vecops::dot(w, &sub(mean, x_true));
    standard_normal_cdf(num / variance.sqrt())
}

enum SimResult {
    Rank { rank: f64, z: Option<f64> },
    Degenerate,
}

/// Stream indices 0 and 1 of a run's seed are reserved for the matrix
/// and test-vector draws; simulations start here.
const SIM_STREAM_BASE: u64 = 16;

/// Runs simulation-based calibration: `n_sim` independent truths from
/// `N(0, A⁻¹)`, one solve each, rank statistics against the posterior.
pub fn sbc_run(cfg: &SbcConfig) -> Result<CalibrationReport, CalibrationError> {
    cfg.validate()?;
    let d = cfg.dim;

    let matrix_seed = cfg.matrix_seed.unwrap_or(cfg.seed);
    let a = sample_spd_exp(d, &mut RngStream::new(matrix_seed, 0))?;
    let factor = SpdFactor::new(&a)?;

    let w = match &cfg.test_vector {
        TestVector::RandomUnit => {
            let mut v = RngStream::new(cfg.seed, 1).normal_vec(d);
            let n = norm2(&v);
            for x in v.iter_mut() {
                *x /= n;
            }
            v
        }
        TestVector::Fixed(w) => w.clone(),
    };

    let solver_cfg = match cfg.method {
        // plain CG: single tolerance, no postiteration budget
        SolveMethod::Cg => SolverConfig::new(cfg.eps2, cfg.eps2)?,
        _ => SolverConfig::new(cfg.eps1, cfg.eps2)?,
    };

    let x0 = vec![0.0; d];
    let sims: Vec<Result<SimResult, CalibrationError>> = (0..cfg.n_sim)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(cfg.seed, SIM_STREAM_BASE + i as u64);
            let xi = rng.normal_vec(d);
            let x_true = factor.solve_upper_triangular(&xi)?;
            let b = a.matvec(&x_true)?;
            let outcome: SolveOutcome = match cfg.method {
                SolveMethod::Rpi => rpi_solve(&a, &b, &x0, &solver_cfg, &mut rng)?,
                _ => pi_solve(&a, &b, &x0, &solver_cfg)?,
            };
            let variance = posterior_variance_of(&w, &outcome)?;
            if variance <= DEGENERATE_VARIANCE {
                return Ok(SimResult::Degenerate);
            }
            let rank = sbc_rank(&w, &outcome.mean, &x_true, variance);
            let z = if cfg.record_z && outcome.low_rank_factor.ncols() > 0 {
                Some(z_statistic(&x_true, &outcome)?)
            } else {
                None
            };
            Ok(SimResult::Rank { rank, z })
        })
        .collect();

    let mut ranks = Vec::with_capacity(cfg.n_sim);
    let mut z_samples = Vec::new();
    let mut degenerate = 0usize;
    for sim in sims {
        match sim? {
            SimResult::Rank { rank, z } => {
                ranks.push(rank);
                if let Some(z) = z {
                    z_samples.push(z);
                }
            }
            SimResult::Degenerate => degenerate += 1,
        }
    }

    let ks = if ranks.is_empty() { f64::NAN } else { ks_statistic(&ranks)? };
    let histogram = Histogram::from_unit_samples(&ranks, cfg.histogram_bins);

    Ok(CalibrationReport {
        ranks,
        ks_statistic: ks,
        histogram,
        z_samples: if cfg.record_z { Some(z_samples) } else { None },
        degenerate,
        metadata: ReportMetadata {
            config: cfg.clone(),
            test_vector: w,
            rng_algorithm: RNG_ALGORITHM.to_string(),
        },
    })
}

/// Exact KS statistic of samples in [0, 1] against U(0, 1):
/// `max_i max(i/n - u_(i), u_(i) - (i-1)/n)` over the order statistics.
pub fn ks_statistic(samples: &[f64]) -> Result<f64, CalibrationError> {
    if samples.is_empty() {
        return Err(CalibrationError::EmptySample);
    }
    let mut sorted = Vec::with_capacity(samples.len());
    for &s in samples {
        if !(0.0..=1.0).contains(&s) {
            return Err(CalibrationError::OutOfRange(s));
        }
        sorted.push(s);
    }
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut sup = 0.0f64;
    for (i, &u) in sorted.iter().enumerate() {
        let hi = (i + 1) as f64 / n - u;
        let lo = u - i as f64 / n;
        sup = sup.max(hi).max(lo);
    }
    Ok(sup)
}

/// KS goodness-of-fit of Z-statistic samples against the chi-squared
/// law with `dof` degrees of freedom, with a pass/fail verdict at the
/// asymptotic 1% level.
pub fn chi2_calibration_test(z_samples: &[f64], dof: usize) -> Result<(f64, bool), CalibrationError> {
    if dof == 0 {
        return Err(CalibrationError::InvalidDof(0));
    }
    if z_samples.len() < 100 {
        return Err(CalibrationError::InsufficientSamples { needed: 100, got: z_samples.len() });
    }
    // probability integral transform reduces the test to uniformity
    let u: Vec<f64> = z_samples
        .iter()
        .map(|&z| chi2_cdf(z, dof))
        .collect::<Result<_, _>>()?;
    let ks = ks_statistic(&u)?;
    Ok((ks, ks < ks_critical_value_1pct(z_samples.len())))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub dims: Vec<usize>,
    pub eps1_grid: Vec<f64>,
    pub eps2_grid: Vec<f64>,
    pub methods: Vec<SolveMethod>,
    pub replicates: usize,
    pub sims_per_replicate: usize,
    pub matrix_policy: MatrixPolicy,
    pub seed: u64,
}

impl SweepConfig {
    fn validate(&self) -> Result<(), CalibrationError> {
        if self.dims.is_empty() || self.eps1_grid.is_empty() || self.eps2_grid.is_empty() || self.methods.is_empty() {
            return Err(CalibrationError::InvalidConfig("sweep grids must be nonempty".into()));
        }
        if self.replicates == 0 || self.sims_per_replicate == 0 {
            return Err(CalibrationError::InvalidConfig(
                "replicates and sims_per_replicate must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One aggregated grid point of a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: String,
    pub dim: usize,
    pub eps1: f64,
    pub eps2: f64,
    pub ks_median: f64,
    pub ks_q1: f64,
    pub ks_q3: f64,
    /// Replicates contributing a KS value.
    pub n_replicates: usize,
    /// Replicates that failed outright (solver error).
    pub n_failed: usize,
    /// Total degenerate-variance warnings across replicates.
    pub degenerate_warnings: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// KS of uniform samples against the uniform itself, same replicate
    /// and sample counts: the attainable floor.
    pub uniform_baseline: SweepRow,
    /// Grid combinations skipped because `eps2 > eps1`.
    pub skipped_invalid: usize,
}

fn summarize(method: String, dim: usize, eps1: f64, eps2: f64, ks: &[f64], n_failed: usize, degenerate: usize) -> SweepRow {
    let (median, q1, q3) = if ks.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        (quantile(ks, 0.5), quantile(ks, 0.25), quantile(ks, 0.75))
    };
    SweepRow {
        method,
        dim,
        eps1,
        eps2,
        ks_median: median,
        ks_q1: q1,
        ks_q3: q3,
        n_replicates: ks.len(),
        n_failed,
        degenerate_warnings: degenerate,
    }
}

/// Maps the SBC KS statistic over (dim, eps1, eps2, method) grid points
/// with `replicates` independent runs per point; failed replicates are
/// counted, not fatal.
pub fn ks_sweep(cfg: &SweepConfig) -> Result<SweepTable, CalibrationError> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut skipped = 0usize;
    let mut point_index = 0u64;
    let mut combo_index = 0u64;

    for &dim in &cfg.dims {
        for &eps1 in &cfg.eps1_grid {
            for &eps2 in &cfg.eps2_grid {
                if eps2 > eps1 {
                    skipped += 1;
                    continue;
                }
                combo_index += 1;
                // a fixed matrix is shared by all replicates AND all
                // methods at this (dim, eps1, eps2) point
                let fixed_matrix_seed = derive_seed(cfg.seed, 0x4d41_0000_0000_0000 | combo_index);
                for method in &cfg.methods {
                    let matrix_seed = match cfg.matrix_policy {
                        MatrixPolicy::FixedPerRun => Some(fixed_matrix_seed),
                        MatrixPolicy::RedrawnPerReplicate => None,
                    };
                    let runs: Vec<Result<CalibrationReport, CalibrationError>> = (0..cfg.replicates)
                        .into_par_iter()
                        .map(|r| {
                            let label = point_index * 1_000_003 + r as u64;
                            let sub = SbcConfig {
                                matrix_seed,
                                ..SbcConfig::new(
                                    dim,
                                    cfg.sims_per_replicate,
                                    eps1,
                                    eps2,
                                    *method,
                                    derive_seed(cfg.seed, label),
                                )
                            };
                            sbc_run(&sub)
                        })
                        .collect();

                    let mut ks = Vec::new();
                    let mut n_failed = 0usize;
                    let mut degenerate = 0usize;
                    for run in runs {
                        match run {
                            Ok(report) => {
                                degenerate += report.degenerate;
                                if report.ks_statistic.is_finite() {
                                    ks.push(report.ks_statistic);
                                }
                            }
                            Err(_) => n_failed += 1,
                        }
                    }
                    rows.push(summarize(method.name().to_string(), dim, eps1, eps2, &ks, n_failed, degenerate));
                    point_index += 1;
                }
            }
        }
    }

    // uniform-vs-uniform baseline at the same replicate geometry
    let baseline_ks: Vec<f64> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = RngStream::new(derive_seed(cfg.seed, 0xBA5E_0000_0000_0000 | r as u64), 0);
            let samples: Vec<f64> = (0..cfg.sims_per_replicate).map(|_| rng.uniform()).collect();
            ks_statistic(&samples).expect("uniform draws are in range")
        })
        .collect();
    let uniform_baseline = summarize("uniform".to_string(), 0, 0.0, 0.0, &baseline_ks, 0, 0);

    Ok(SweepTable { rows, uniform_baseline, skipped_invalid: skipped })
}
