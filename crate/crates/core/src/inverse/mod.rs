//! The porous-medium inverse problem.
//!
//! Steady-state flow through the unit square with a low-porosity
//! inclusion on `[0.25, 0.75]²` whose strength `exp(theta)` is inferred
//! from four point observations of the solved field. The pipeline:
//! P1 finite elements on a uniform right-triangle grid ([`mesh`],
//! [`assemble`]), a Gaussian likelihood optionally inflated by the
//! solver's posterior covariance ([`pn_log_likelihood`]), random-walk
//! Metropolis over `theta` ([`rwm_sample`]), and kernel density
//! estimates of the posterior ([`kde`]).

mod assembly;
mod kde;
mod mcmc;
mod mesh;
mod model;

pub use assembly::assemble;
pub use kde::{kde, Bandwidth, DensityCurve};
pub use mcmc::{rwm_sample, summarize_chain, ChainSummary, InverseSolver, McmcChain};
pub use mesh::Mesh;
pub use model::{
    boundary_value, generate_data, plug_in_log_likelihood, pn_log_likelihood, ForwardModel,
    Porosity, OBSERVATION_POINTS,
};

use thiserror::Error;

use crate::matrix::MatrixError;
use crate::solvers::SolverError;

#[derive(Debug, Error)]
pub enum InverseError {
    #[error("invalid mesh: {0}")]
    Mesh(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("observation point ({0}, {1}) is not a free mesh node")]
    BadObservation(f64, f64),
    #[error("solver did not converge within its iteration cap")]
    NonConverged,
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}
