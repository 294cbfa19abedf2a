//! Probabilistic linear solvers built around conjugate gradients.
//!
//! The crate provides:
//!
//! * [`matrix`] — symmetric positive definite operators (dense and CSR),
//!   a Cholesky-backed direct solver used as the exact reference, and
//!   random SPD test-matrix generation.
//! * [`solvers`] — CG, deterministic postiterations (PI) and randomised
//!   postiterations (RPI), which attach a low-rank posterior covariance
//!   factor to the CG iterate, together with the Z-statistic and
//!   whitening transforms used to assess that posterior.
//! * [`calibration`] — simulation-based calibration, Kolmogorov–Smirnov
//!   sweeps and chi-squared goodness-of-fit testing of solver output.
//! * [`inverse`] — a porous-medium PDE inverse problem: P1 finite-element
//!   assembly, solver-aware Gaussian likelihoods, random-walk Metropolis
//!   and kernel density estimation.
//! * [`selftest`] — the invariant suites behind the `selftest` CLI command.
//!
//! All randomness flows through [`rng::RngStream`], a counter-based stream
//! so that every result is reproducible from `(seed, stream)` and parallel
//! work can partition by stream index.

pub mod calibration;
pub mod inverse;
pub mod matrix;
pub mod rng;
pub mod selftest;
pub mod solvers;
pub mod vecops;
