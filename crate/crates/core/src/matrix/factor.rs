//! Direct factorization: the exact reference solver.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{MatrixError, SpdMatrix};

/// Cholesky factorization `A = L Lᵀ` of an [`SpdMatrix`].
///
/// Sparse operators are densified first; every system in this crate is
/// small enough (d ≲ 1000) that this is the cheapest reliable route, and
/// a successful factorization doubles as the positive-definiteness check.
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    dim: usize,
}

impl SpdFactor {
    pub fn new(a: &SpdMatrix) -> Result<Self, MatrixError> {
        let dense = a.to_dmatrix();
        let chol = Cholesky::new(dense).ok_or(MatrixError::NotPositiveDefinite)?;
        Ok(SpdFactor { chol, dim: a.dim() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, MatrixError> {
        if b.len() != self.dim {
            return Err(MatrixError::DimensionMismatch { expected: self.dim, found: b.len() });
        }
        let x = self.chol.solve(&DVector::from_column_slice(b));
        Ok(x.as_slice().to_vec())
    }

    /// Solves `Lᵀ x = b` against the upper-triangular factor.
    ///
    /// With `ξ ~ N(0, I)`, the solution of `Lᵀ x = ξ` is distributed
    /// `N(0, A⁻¹)`; this is how priors over solutions are sampled.
    pub fn solve_upper_triangular(&self, b: &[f64]) -> Result<Vec<f64>, MatrixError> {
        if b.len() != self.dim {
            return Err(MatrixError::DimensionMismatch { expected: self.dim, found: b.len() });
        }
        let lt = self.chol.l().transpose();
        let x = lt
            .solve_upper_triangular(&DVector::from_column_slice(b))
            .ok_or(MatrixError::NotPositiveDefinite)?;
        Ok(x.as_slice().to_vec())
    }

    /// Lower factor `L`, exposed for validation code.
    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }
}

/// Solves `A x = b` by dense Cholesky. Fails with
/// [`MatrixError::NotPositiveDefinite`] when a pivot is not positive.
pub fn direct_solve(a: &SpdMatrix, b: &[f64]) -> Result<Vec<f64>, MatrixError> {
    SpdFactor::new(a)?.solve(b)
}

/// Residual `b - A x` with compensated (Neumaier + fused multiply-add)
/// accumulation, accurate well below one ulp of the summands.
pub fn compensated_residual(a: &SpdMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    let d = a.dim();
    assert_eq!(x.len(), d);
    assert_eq!(b.len(), d);
    let mut r = vec![0.0; d];
    for i in 0..d {
        let mut sum = b[i];
        let mut comp = 0.0;
        for j in 0..d {
            let aij = a.entry(i, j);
            if aij == 0.0 {
                continue;
            }
            let p = -aij * x[j];
            let perr = (-aij).mul_add(x[j], -p);
            // Neumaier update with the product and its rounding error
            for term in [p, perr] {
                let t = sum + term;
                comp += if sum.abs() >= term.abs() { (sum - t) + term } else { (term - t) + sum };
                sum = t;
            }
        }
        r[i] = sum + comp;
    }
    r
}

/// Refines a direct-solve solution by `iters` steps of iterative
/// refinement with a compensated residual. Used where reference values
/// must be accurate to near machine precision independent of the
/// condition number's effect on one plain solve.
pub fn refine_solution(
    a: &SpdMatrix,
    factor: &SpdFactor,
    b: &[f64],
    x: &mut [f64],
    iters: usize,
) -> Result<(), MatrixError> {
    for _ in 0..iters {
        let r = compensated_residual(a, x, b);
        let dx = factor.solve(&r)?;
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::sample_spd_exp;
    use crate::rng::RngStream;
    use crate::vecops::{norm2, sub};

    #[test]
    fn identity_solve() {
        let a = SpdMatrix::identity(4);
        let b = vec![1.0, -2.0, 3.0, 0.5];
        assert_eq!(direct_solve(&a, &b).unwrap(), b);
    }

    #[test]
    fn diagonal_solve() {
        let a = SpdMatrix::from_diagonal(&[4.0, 9.0]);
        let x = direct_solve(&a, &[4.0, 18.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn recovers_known_solution() {
        let mut rng = RngStream::new(11, 0);
        let a = sample_spd_exp(20, &mut rng).unwrap();
        let x_true: Vec<f64> = (0..20).map(|_| rng.normal()).collect();
        let b = a.matvec(&x_true).unwrap();
        let x = direct_solve(&a, &b).unwrap();
        assert!(norm2(&sub(&x, &x_true)) <= 1e-9 * norm2(&x_true));
    }

    #[test]
    fn residual_contract() {
        let mut rng = RngStream::new(12, 0);
        for d in [5, 40] {
            let a = sample_spd_exp(d, &mut rng).unwrap();
            let b: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            let x = direct_solve(&a, &b).unwrap();
            let r = sub(&b, &a.matvec(&x).unwrap());
            assert!(norm2(&r) <= 1e-10 * norm2(&b));
        }
    }

    #[test]
    fn not_positive_definite_detected() {
        let a = SpdMatrix::from_dense(2, vec![1.0, 2.0, 2.0, 1.0]).unwrap(); // indefinite
        assert!(matches!(direct_solve(&a, &[1.0, 1.0]), Err(MatrixError::NotPositiveDefinite)));
    }

    #[test]
    fn refinement_tightens_residual() {
        let mut rng = RngStream::new(13, 0);
        let a = sample_spd_exp(30, &mut rng).unwrap();
        let b: Vec<f64> = (0..30).map(|_| rng.normal()).collect();
        let factor = SpdFactor::new(&a).unwrap();
        let mut x = factor.solve(&b).unwrap();
        refine_solution(&a, &factor, &b, &mut x, 2).unwrap();
        let r = compensated_residual(&a, &x, &b);
        assert!(norm2(&r) <= 1e-13 * norm2(&b), "residual {}", norm2(&r) / norm2(&b));
    }

    #[test]
    fn prior_sample_transform_has_inverse_covariance() {
        // x = L⁻ᵀ ξ  =>  xᵀ A x = ‖ξ‖², checked on one draw
        let mut rng = RngStream::new(14, 0);
        let a = sample_spd_exp(12, &mut rng).unwrap();
        let f = SpdFactor::new(&a).unwrap();
        let xi: Vec<f64> = (0..12).map(|_| rng.normal()).collect();
        let x = f.solve_upper_triangular(&xi).unwrap();
        let qf = a.quadratic_form(&x).unwrap();
        let expect = crate::vecops::dot(&xi, &xi);
        assert!((qf - expect).abs() <= 1e-9 * expect.max(1.0));
    }
}
