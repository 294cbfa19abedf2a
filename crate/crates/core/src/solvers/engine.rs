//! The shared Krylov recursion behind CG, PI and RPI.
//!
//! One loop serves all three solvers, so the mean-phase arithmetic is
//! literally the same instruction sequence everywhere: the PI/RPI mean
//! is bit-identical to the CG iterate at the same tolerance.

use super::{KrylovTrace, LowRankFactor, SolveOutcome, SolverConfig, SolverError};
use crate::matrix::SpdMatrix;
use crate::vecops::{all_finite, axpy, dot, norm2, scaled, sub};

/// How postiterations treat the returned mean.
pub(super) enum MeanUpdate<'a> {
    /// Mean frozen at the `eps1` iterate (CG / PI).
    Deterministic,
    /// Mean perturbed by `alpha_k (z_k + 1) s_k` per postiteration (RPI).
    Randomised(&'a mut dyn FnMut() -> f64),
}

/// Stored direction for reorthogonalisation.
struct StoredDirection {
    s: Vec<f64>,
    a_s: Vec<f64>,
    s_a_s: f64,
}

pub(super) fn run(
    a: &SpdMatrix,
    b: &[f64],
    x0: &[f64],
    cfg: &SolverConfig,
    mut mean_update: MeanUpdate<'_>,
) -> Result<SolveOutcome, SolverError> {
    cfg.validate()?;
    let d = a.dim();
    if b.len() != d {
        return Err(SolverError::DimensionMismatch { expected: d, found: b.len() });
    }
    if x0.len() != d {
        return Err(SolverError::DimensionMismatch { expected: d, found: x0.len() });
    }
    if !all_finite(b) || !all_finite(x0) {
        return Err(SolverError::Breakdown { iteration: 0, what: "non-finite input".into() });
    }

    let b_norm = norm2(b);
    let mut trace = KrylovTrace::default();
    let retain = cfg.reorthogonalise || cfg.retain_directions;
    if retain {
        trace.directions = Some(Vec::new());
    }
    if cfg.track_true_residual {
        trace.true_residual_norms = Some(Vec::new());
    }

    // ‖b‖ = 0 makes the relative test degenerate, and x = 0 is the exact
    // solution regardless of x0.
    if b_norm == 0.0 {
        trace.residual_norms = vec![0.0];
        trace.converged = true;
        return Ok(SolveOutcome {
            mean: vec![0.0; d],
            low_rank_factor: LowRankFactor::empty(d),
            m: 0,
            t: 0,
            residual_history: vec![0.0],
            trace,
            converged: true,
            seed: None,
        });
    }

    let max_iter = cfg.max_iter.unwrap_or(10 * d);

    let mut x = x0.to_vec();
    let mut r = sub(b, &a.matvec(x0)?);
    let mut rr = dot(&r, &r);
    let mut rnorm = rr.sqrt();
    if !rnorm.is_finite() {
        return Err(SolverError::Breakdown { iteration: 0, what: "non-finite initial residual".into() });
    }
    trace.residual_norms.push(rnorm);

    // The mean phase can already be over at k = 0. The comparison is
    // strict here (unlike the in-loop `<=`): with x0 = 0 the initial
    // residual equals ‖b‖ exactly, so eps1 = 1 still runs a first CG
    // iteration while eps1 > 1 postiterates from m = 0.
    let mut m: Option<usize> = (rnorm < cfg.eps1 * b_norm).then_some(0);
    let mut x_mean: Option<Vec<f64>> = m.map(|_| x.clone());
    let mut x_tilde: Option<Vec<f64>> = x_mean.clone();

    let mut factor = LowRankFactor::empty(d);
    let mut s = r.clone();
    let mut a_s = vec![0.0; d];
    let mut stored: Vec<StoredDirection> = Vec::new();
    let mut k = 0usize;
    let mut converged = true;

    while !(m.is_some() && rnorm <= cfg.eps2 * b_norm) {
        if k >= max_iter {
            converged = false;
            break;
        }
        k += 1;

        if cfg.reorthogonalise && !stored.is_empty() {
            // two modified Gram-Schmidt passes in the A inner product
            for _ in 0..2 {
                for dir in &stored {
                    let c = dot(&s, &dir.a_s) / dir.s_a_s;
                    axpy(-c, &dir.s, &mut s);
                }
            }
        }

        a.apply_into(&s, &mut a_s);
        let s_a_s = dot(&s, &a_s);
        if !s_a_s.is_finite() || s_a_s <= 0.0 {
            return Err(SolverError::Breakdown {
                iteration: k,
                what: format!("sᵀA s = {s_a_s} is not positive"),
            });
        }
        if cfg.reorthogonalise {
            stored.push(StoredDirection { s: s.clone(), a_s: a_s.clone(), s_a_s });
        }

        let alpha = rr / s_a_s;
        let psi = rr / s_a_s.sqrt();
        axpy(alpha, &s, &mut x);
        axpy(-alpha, &a_s, &mut r);
        let rr_new = dot(&r, &r);
        rnorm = rr_new.sqrt();
        if !rnorm.is_finite() {
            return Err(SolverError::Breakdown { iteration: k, what: "non-finite residual".into() });
        }
        let beta = rr_new / rr;

        trace.alphas.push(alpha);
        trace.betas.push(beta);
        trace.s_a_s.push(s_a_s);
        trace.psis.push(psi);
        trace.residual_norms.push(rnorm);
        if let Some(dirs) = trace.directions.as_mut() {
            dirs.push(s.clone());
        }
        if let Some(true_norms) = trace.true_residual_norms.as_mut() {
            true_norms.push(norm2(&sub(b, &a.matvec(&x)?)));
        }

        if m.is_none() {
            if rnorm <= cfg.eps1 * b_norm {
                m = Some(k);
                x_mean = Some(x.clone());
                x_tilde = Some(x.clone());
            }
        } else {
            // postiteration: extend the covariance factor, and for RPI
            // perturb the randomised mean along this direction
            factor.push_column(&scaled(alpha, &s));
            if let MeanUpdate::Randomised(draw) = &mut mean_update {
                let z = draw();
                if let Some(xt) = x_tilde.as_mut() {
                    axpy(alpha * (z + 1.0), &s, xt);
                }
            }
        }

        rr = rr_new;
        for i in 0..d {
            s[i] = r[i] + beta * s[i];
        }
    }

    let t = k;
    // Iteration cap hit before the mean tolerance: return the last
    // iterate as the mean with an empty factor, flagged non-converged.
    let (m, mean) = match (m, &mean_update) {
        (Some(m), MeanUpdate::Deterministic) => (m, x_mean.expect("mean recorded at m")),
        (Some(m), MeanUpdate::Randomised(_)) => (m, x_tilde.expect("mean recorded at m")),
        (None, _) => {
            factor = LowRankFactor::empty(d);
            (t, x)
        }
    };
    trace.converged = converged;

    Ok(SolveOutcome {
        mean,
        low_rank_factor: factor,
        m,
        t,
        residual_history: trace.residual_norms.clone(),
        trace,
        converged,
        seed: None,
    })
}
