//! Posterior evaluation against a known truth.
//!
//! The posterior covariance is `Sigma = L Lᵀ`, so its pseudoinverse is
//! never needed explicitly: `Z = ‖L† e‖²` and the whitened error is the
//! least-squares coefficient vector of `e` against the columns of `L`.

use nalgebra::DVector;

use super::{LowRankFactor, SolveOutcome, SolverError};
use crate::vecops::{dot, norm2, sub};

/// Rank tolerance of the least-squares solve, applied to the
/// column-equilibrated factor: a pivot below `Z_RANK_TOL` times the
/// leading pivot marks the columns as collinear. Equilibration first is
/// essential; postiteration columns legitimately span many orders of
/// magnitude without being anywhere near collinear.
pub const Z_RANK_TOL: f64 = 1e-10;

/// Minimum-norm least-squares coefficients `L† e` by column-pivoted QR
/// on the column-equilibrated factor.
fn pinv_apply(l: &LowRankFactor, e: &[f64]) -> Result<Vec<f64>, SolverError> {
    let rows = l.rows();
    let cols = l.ncols();
    assert_eq!(e.len(), rows);
    if cols == 0 {
        return Ok(Vec::new());
    }
    if rows < cols {
        return Err(SolverError::RankDeficient { rank: rows, cols });
    }
    let mut norms = Vec::with_capacity(cols);
    for col in l.columns() {
        let n = norm2(col);
        if n == 0.0 || !n.is_finite() {
            return Err(SolverError::RankDeficient { rank: 0, cols });
        }
        norms.push(n);
    }
    let mut lhat = l.to_dmatrix();
    for (k, &n) in norms.iter().enumerate() {
        for i in 0..rows {
            lhat[(i, k)] /= n;
        }
    }
    let qr = lhat.col_piv_qr();
    let r = qr.r();
    let lead = r[(0, 0)].abs();
    for i in 0..cols {
        if r[(i, i)].abs() < Z_RANK_TOL * lead {
            return Err(SolverError::RankDeficient { rank: i, cols });
        }
    }
    let qte = qr.q().transpose() * DVector::from_column_slice(e);
    let mut y = r
        .solve_upper_triangular(&qte)
        .ok_or(SolverError::RankDeficient { rank: cols, cols })?;
    // L̂ P = Q R, so L̂† e = P R⁻¹ Qᵀ e
    qr.p().inv_permute_rows(&mut y);
    Ok(y.iter().zip(&norms).map(|(c, n)| c / n).collect())
}

/// Whitened error `L† (x - mean)`, distributed `N(0, I)` under a
/// calibrated posterior; one coordinate per postiteration.
pub fn whitened_error(x_true: &[f64], outcome: &SolveOutcome) -> Result<Vec<f64>, SolverError> {
    let l = &outcome.low_rank_factor;
    if x_true.len() != l.rows() {
        return Err(SolverError::DimensionMismatch { expected: l.rows(), found: x_true.len() });
    }
    pinv_apply(l, &sub(x_true, &outcome.mean))
}

/// The Z-statistic `(mean - x)ᵀ Sigma† (mean - x) = ‖L†(x - mean)‖²`,
/// distributed chi-squared with `t - m` degrees of freedom under a
/// calibrated posterior.
pub fn z_statistic(x_true: &[f64], outcome: &SolveOutcome) -> Result<f64, SolverError> {
    let c = whitened_error(x_true, outcome)?;
    Ok(dot(&c, &c))
}

/// Posterior variance in direction `w`: `wᵀ L Lᵀ w = ‖Lᵀ w‖²`.
pub fn posterior_variance_of(w: &[f64], outcome: &SolveOutcome) -> Result<f64, SolverError> {
    let l = &outcome.low_rank_factor;
    if w.len() != l.rows() {
        return Err(SolverError::DimensionMismatch { expected: l.rows(), found: w.len() });
    }
    let ltw = l.transpose_apply(w);
    Ok(dot(&ltw, &ltw))
}
