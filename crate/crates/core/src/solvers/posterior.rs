//! Dense reference implementation of the Gaussian conditioning posterior.
//!
//! Small-scale validation code: given an explicit prior covariance and a
//! block of search directions it evaluates the closed-form posterior
//!
//! ```text
//! mean = x0 + Sigma0 A S Lambda⁻¹ Sᵀ (b - A x0)
//! cov  = Sigma0 - Sigma0 A S Lambda⁻¹ Sᵀ A Sigma0,   Lambda = Sᵀ A Sigma0 A S
//! ```
//!
//! With the inverse prior `Sigma0 = A⁻¹` this reproduces the CG iterate
//! and the rank `d - m` covariance the iterative solvers represent
//! implicitly. Everything here is dense and cubic; keep `d` small.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::SolverError;
use crate::matrix::SpdMatrix;

/// Explicit Gaussian posterior over the solution.
#[derive(Debug, Clone)]
pub struct DensePosterior {
    pub mean: Vec<f64>,
    pub covariance: DMatrix<f64>,
}

/// Gaussian conditioning of the prior `N(x0, sigma0)` on the information
/// `Sᵀ A x = Sᵀ b`. `directions` is `d x m`; `m = 0` returns the prior.
pub fn bayescg_dense(
    a: &SpdMatrix,
    b: &[f64],
    x0: &[f64],
    sigma0: &DMatrix<f64>,
    directions: &DMatrix<f64>,
) -> Result<DensePosterior, SolverError> {
    let d = a.dim();
    if b.len() != d {
        return Err(SolverError::DimensionMismatch { expected: d, found: b.len() });
    }
    if x0.len() != d {
        return Err(SolverError::DimensionMismatch { expected: d, found: x0.len() });
    }
    if sigma0.nrows() != d || sigma0.ncols() != d {
        return Err(SolverError::DimensionMismatch { expected: d, found: sigma0.nrows() });
    }
    if directions.nrows() != d {
        return Err(SolverError::DimensionMismatch { expected: d, found: directions.nrows() });
    }

    let m = directions.ncols();
    if m == 0 {
        return Ok(DensePosterior { mean: x0.to_vec(), covariance: sigma0.clone() });
    }

    let a_dense = a.to_dmatrix();
    let a_s = &a_dense * directions; // d x m
    let g = sigma0 * &a_s; // Sigma0 Aᵀ S, d x m
    let lambda = a_s.transpose() * &g; // m x m
    let lambda_chol = Cholesky::new(lambda).ok_or(SolverError::SingularInformation)?;

    let r0 = DVector::from_column_slice(b) - &a_dense * DVector::from_column_slice(x0);
    let st_r0 = directions.transpose() * r0;
    let mean = DVector::from_column_slice(x0) + &g * lambda_chol.solve(&st_r0);

    let mut covariance = sigma0 - &g * lambda_chol.solve(&g.transpose());
    // symmetrize away the rounding skew of the triple product
    for i in 0..d {
        for j in (i + 1)..d {
            let v = 0.5 * (covariance[(i, j)] + covariance[(j, i)]);
            covariance[(i, j)] = v;
            covariance[(j, i)] = v;
        }
    }

    Ok(DensePosterior { mean: mean.as_slice().to_vec(), covariance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{sample_spd_exp, SpdFactor};
    use crate::rng::RngStream;
    use crate::solvers::{cg_solve_with_config, SolverConfig};
    use crate::vecops::norm2;

    fn inverse_of(a: &SpdMatrix) -> DMatrix<f64> {
        let d = a.dim();
        let f = SpdFactor::new(a).unwrap();
        let mut inv = DMatrix::zeros(d, d);
        for j in 0..d {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            let col = f.solve(&e).unwrap();
            for i in 0..d {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }

    fn cg_direction_block(a: &SpdMatrix, b: &[f64], m: usize) -> DMatrix<f64> {
        let d = a.dim();
        let cfg = SolverConfig::new(1e-14, 1e-14)
            .unwrap()
            .reorthogonalised()
            .retaining_directions();
        let out = cg_solve_with_config(a, b, &vec![0.0; d], &cfg).unwrap();
        let dirs = out.trace.directions.as_ref().unwrap();
        assert!(dirs.len() >= m);
        DMatrix::from_fn(d, m, |i, j| dirs[j][i])
    }

    #[test]
    fn empty_directions_return_prior() {
        let mut rng = RngStream::new(41, 0);
        let a = sample_spd_exp(6, &mut rng).unwrap();
        let b = rng.normal_vec(6);
        let sigma0 = DMatrix::identity(6, 6);
        let s = DMatrix::zeros(6, 0);
        let post = bayescg_dense(&a, &b, &[0.0; 6], &sigma0, &s).unwrap();
        assert_eq!(post.mean, vec![0.0; 6]);
        assert_eq!(post.covariance, sigma0);
    }

    #[test]
    fn full_directions_give_exact_solution_and_zero_covariance() {
        let mut rng = RngStream::new(42, 0);
        let d = 8;
        let a = sample_spd_exp(d, &mut rng).unwrap();
        let x_true = rng.normal_vec(d);
        let b = a.matvec(&x_true).unwrap();
        let sigma0 = inverse_of(&a);
        let s = cg_direction_block(&a, &b, d);
        let post = bayescg_dense(&a, &b, &vec![0.0; d], &sigma0, &s).unwrap();
        let err = norm2(&crate::vecops::sub(&post.mean, &x_true));
        assert!(err <= 1e-8 * norm2(&x_true), "mean error {err}");
        assert!(post.covariance.amax() <= 1e-8);
    }

    #[test]
    fn inverse_prior_mean_matches_cg_iterate() {
        let mut rng = RngStream::new(43, 0);
        let d = 10;
        let m = 4;
        let a = sample_spd_exp(d, &mut rng).unwrap();
        let b = rng.normal_vec(d);
        let x0 = vec![0.0; d];

        let sigma0 = inverse_of(&a);
        let s = cg_direction_block(&a, &b, m);
        let post = bayescg_dense(&a, &b, &x0, &sigma0, &s).unwrap();

        // CG iterate after m iterations: accumulate alpha_k s_k
        let cfg = SolverConfig::new(1e-14, 1e-14)
            .unwrap()
            .reorthogonalised()
            .retaining_directions();
        let out = cg_solve_with_config(&a, &b, &x0, &cfg).unwrap();
        let dirs = out.trace.directions.as_ref().unwrap();
        let mut x_m = x0.clone();
        for k in 0..m {
            crate::vecops::axpy(out.trace.alphas[k], &dirs[k], &mut x_m);
        }
        let diff = norm2(&crate::vecops::sub(&post.mean, &x_m));
        assert!(diff <= 1e-8 * norm2(&x_m).max(1.0), "mean deviates by {diff}");

        // covariance agrees with the inverse-prior closed form
        let sm = s.clone();
        let gram = sm.transpose() * a.to_dmatrix() * &sm;
        let explicit = &sigma0 - &sm * gram.cholesky().unwrap().inverse() * sm.transpose();
        assert!((post.covariance.clone() - explicit).amax() <= 1e-8);
    }

    #[test]
    fn posterior_rank_and_weighted_null_space() {
        let mut rng = RngStream::new(44, 0);
        let d = 10;
        let m = 3;
        let a = sample_spd_exp(d, &mut rng).unwrap();
        let b = rng.normal_vec(d);
        let sigma0 = inverse_of(&a);
        let s = cg_direction_block(&a, &b, m);
        let post = bayescg_dense(&a, &b, &vec![0.0; d], &sigma0, &s).unwrap();

        let eig = nalgebra::SymmetricEigen::new(post.covariance.clone());
        let nonzero = eig.eigenvalues.iter().filter(|l| l.abs() > 1e-10).count();
        assert_eq!(nonzero, d - m, "covariance rank");

        // Sigma_m (A s_j) = 0 for each conditioned direction
        let a_dense = a.to_dmatrix();
        for j in 0..m {
            let asj = &a_dense * s.column(j);
            let img = &post.covariance * &asj;
            assert!(img.amax() <= 1e-8 * asj.amax(), "A-weighted direction {j} not annihilated");
        }
    }

    #[test]
    fn rank_deficient_information_rejected() {
        let a = SpdMatrix::identity(4);
        let b = vec![1.0; 4];
        let sigma0 = DMatrix::identity(4, 4);
        // two identical columns
        let s = DMatrix::from_fn(4, 2, |i, _| if i == 0 { 1.0 } else { 0.0 });
        assert!(matches!(
            bayescg_dense(&a, &b, &[0.0; 4], &sigma0, &s),
            Err(SolverError::SingularInformation)
        ));
    }
}
