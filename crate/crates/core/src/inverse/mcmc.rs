//! Random-walk Metropolis over the porosity parameter.

use serde::{Deserialize, Serialize};

use super::assembly::assemble;
use super::model::{plug_in_log_likelihood, pn_log_likelihood, ForwardModel};
use super::InverseError;
use crate::matrix::direct_solve;
use crate::rng::{RngStream, StreamId};
use crate::solvers::{cg_solve, pi_solve, rpi_solve, SolverConfig};

/// Linear-system solver used inside each likelihood evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "method")]
pub enum InverseSolver {
    /// Direct factorization with the plain likelihood.
    Exact,
    /// CG at a fixed tolerance with the plain (plug-in) likelihood.
    Cg { eps: f64 },
    /// Deterministic postiterations with the inflated likelihood.
    Pi { eps1: f64, eps2: f64 },
    /// Randomised postiterations with the inflated likelihood; the
    /// perturbation draws are taken fresh from the chain's stream at
    /// every evaluation.
    Rpi { eps1: f64, eps2: f64 },
}

impl InverseSolver {
    pub fn name(&self) -> &'static str {
        match self {
            InverseSolver::Exact => "exact",
            InverseSolver::Cg { .. } => "cg",
            InverseSolver::Pi { .. } => "pi",
            InverseSolver::Rpi { .. } => "rpi",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McmcChain {
    pub samples: Vec<f64>,
    pub log_posts: Vec<f64>,
    pub accepted: Vec<bool>,
    pub acceptance_count: usize,
    /// Standard deviation of the Gaussian proposal.
    pub proposal_scale: f64,
    pub seed: StreamId,
    /// Proposals rejected because the solver hit its iteration cap.
    pub solver_failures: usize,
}

impl McmcChain {
    pub fn acceptance_rate(&self) -> f64 {
        self.acceptance_count as f64 / self.samples.len() as f64
    }
}

fn log_prior(theta: f64) -> f64 {
    -0.5 * theta * theta - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

fn log_posterior(
    model: &ForwardModel,
    solver: InverseSolver,
    theta: f64,
    rng: &mut RngStream,
) -> Result<f64, InverseError> {
    let (a, rhs) = assemble(&model.mesh, theta)?;
    let x0 = vec![0.0; a.dim()];
    let loglik = match solver {
        InverseSolver::Exact => {
            let x = direct_solve(&a, &rhs)?;
            plug_in_log_likelihood(&model.data, &x, model.sigma, model)?
        }
        InverseSolver::Cg { eps } => {
            let (x, trace) = cg_solve(&a, &rhs, &x0, eps, None)?;
            if !trace.converged {
                return Err(InverseError::NonConverged);
            }
            plug_in_log_likelihood(&model.data, &x, model.sigma, model)?
        }
        InverseSolver::Pi { eps1, eps2 } => {
            let cfg = SolverConfig::new(eps1, eps2)?;
            let out = pi_solve(&a, &rhs, &x0, &cfg)?;
            if !out.converged {
                return Err(InverseError::NonConverged);
            }
            pn_log_likelihood(&model.data, &out, model.sigma, model)?
        }
        InverseSolver::Rpi { eps1, eps2 } => {
            let cfg = SolverConfig::new(eps1, eps2)?;
            let out = rpi_solve(&a, &rhs, &x0, &cfg, rng)?;
            if !out.converged {
                return Err(InverseError::NonConverged);
            }
            pn_log_likelihood(&model.data, &out, model.sigma, model)?
        }
    };
    Ok(loglik + log_prior(theta))
}

/// Random-walk Metropolis with Gaussian proposals of standard deviation
/// `eta`, targeting prior x likelihood for the configured solver. A
/// proposal whose solve does not converge is rejected and counted.
pub fn rwm_sample(
    model: &ForwardModel,
    solver: InverseSolver,
    eta: f64,
    n_iter: usize,
    theta0: f64,
    rng: &mut RngStream,
) -> Result<McmcChain, InverseError> {
    if n_iter == 0 {
        return Err(InverseError::InvalidConfig("n_iter must be at least 1".into()));
    }
    if !(eta > 0.0) {
        return Err(InverseError::InvalidConfig(format!("eta must be positive, got {eta}")));
    }
    let seed = rng.id();

    let mut current = theta0;
    let mut current_lp = log_posterior(model, solver, current, rng)?;

    let mut samples = Vec::with_capacity(n_iter);
    let mut log_posts = Vec::with_capacity(n_iter);
    let mut accepted_flags = Vec::with_capacity(n_iter);
    let mut acceptance_count = 0usize;
    let mut solver_failures = 0usize;

    for _ in 0..n_iter {
        let proposal = current + eta * rng.normal();
        let accept = match log_posterior(model, solver, proposal, rng) {
            Ok(lp) => {
                // symmetric proposal: plain Metropolis ratio
                if rng.uniform().ln() < lp - current_lp {
                    current = proposal;
                    current_lp = lp;
                    true
                } else {
                    false
                }
            }
            Err(InverseError::NonConverged) => {
                solver_failures += 1;
                false
            }
            Err(e) => return Err(e),
        };
        if accept {
            acceptance_count += 1;
        }
        samples.push(current);
        log_posts.push(current_lp);
        accepted_flags.push(accept);
    }

    Ok(McmcChain {
        samples,
        log_posts,
        accepted: accepted_flags,
        acceptance_count,
        proposal_scale: eta,
        seed,
        solver_failures,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainSummary {
    pub mean: f64,
    pub std: f64,
    pub q025: f64,
    pub q975: f64,
    pub acceptance_rate: f64,
    pub n_kept: usize,
    pub burn_in: usize,
}

/// Moments and the 95% central interval of the post-burn-in samples.
pub fn summarize_chain(chain: &McmcChain, burn_in_fraction: f64) -> ChainSummary {
    let burn = ((chain.samples.len() as f64) * burn_in_fraction).floor() as usize;
    let kept = &chain.samples[burn.min(chain.samples.len() - 1)..];
    ChainSummary {
        mean: crate::vecops::mean(kept),
        std: crate::vecops::sample_std(kept),
        q025: crate::vecops::quantile(kept, 0.025),
        q975: crate::vecops::quantile(kept, 0.975),
        acceptance_rate: chain.acceptance_rate(),
        n_kept: kept.len(),
        burn_in: burn,
    }
}
