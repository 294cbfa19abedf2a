//! Random test-matrix generation.

use nalgebra::DMatrix;

use super::{MatrixError, SpdMatrix};
use crate::rng::RngStream;

/// Samples a `d x d` orthogonal matrix from the Haar measure.
///
/// QR of an i.i.d. standard-normal matrix, with the columns of Q flipped
/// to make the R diagonal nonnegative; the sign correction is what makes
/// the QR output exactly Haar rather than merely orthogonal.
pub fn sample_haar_orthogonal(d: usize, rng: &mut RngStream) -> Result<DMatrix<f64>, MatrixError> {
    if d == 0 {
        return Err(MatrixError::InvalidDimension(0));
    }
    let g = DMatrix::from_fn(d, d, |_, _| rng.normal());
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Ok(q)
}

/// Samples `A = W D Wᵀ` with `W` Haar-orthogonal and `D` diagonal with
/// independent Exp(1) entries; the standard SPD test matrix for the
/// calibration experiments.
pub fn sample_spd_exp(d: usize, rng: &mut RngStream) -> Result<SpdMatrix, MatrixError> {
    sample_spd_exp_with_spectrum(d, rng).map(|(a, _)| a)
}

/// As [`sample_spd_exp`], also returning the sampled eigenvalues
/// (the diagonal of D) for validation against an eigensolver.
pub fn sample_spd_exp_with_spectrum(
    d: usize,
    rng: &mut RngStream,
) -> Result<(SpdMatrix, Vec<f64>), MatrixError> {
    let w = sample_haar_orthogonal(d, rng)?;
    let eigs: Vec<f64> = (0..d).map(|_| rng.exp1()).collect();
    Ok((conjugate_spectrum(&w, &eigs)?, eigs))
}

/// `A = W diag(spectrum) Wᵀ` with a fresh Haar-orthogonal `W`: an SPD
/// matrix with exactly the given eigenvalues.
pub fn spd_with_spectrum(spectrum: &[f64], rng: &mut RngStream) -> Result<SpdMatrix, MatrixError> {
    let w = sample_haar_orthogonal(spectrum.len(), rng)?;
    conjugate_spectrum(&w, spectrum)
}

fn conjugate_spectrum(w: &DMatrix<f64>, eigs: &[f64]) -> Result<SpdMatrix, MatrixError> {
    let d = eigs.len();
    let mut wd = w.clone();
    for j in 0..d {
        for i in 0..d {
            wd[(i, j)] *= eigs[j];
        }
    }
    let m = wd * w.transpose();
    // the product is symmetric only to rounding; make it exact
    let mut data = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            data[i * d + j] = 0.5 * (m[(i, j)] + m[(j, i)]);
        }
    }
    SpdMatrix::from_dense(d, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SpdFactor;

    fn orthogonality_defect(w: &DMatrix<f64>) -> f64 {
        let wtw = w.transpose() * w;
        let d = w.nrows();
        let mut defect = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                defect = defect.max((wtw[(i, j)] - target).abs());
            }
        }
        defect
    }

    #[test]
    fn haar_d1_is_sign() {
        for seed in 0..20 {
            let mut rng = RngStream::new(seed, 0);
            let w = sample_haar_orthogonal(1, &mut rng).unwrap();
            assert!((w[(0, 0)].abs() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn haar_is_orthogonal() {
        for (seed, d) in [(0u64, 2usize), (1, 5), (2, 17), (3, 40)] {
            let mut rng = RngStream::new(seed, 0);
            let w = sample_haar_orthogonal(d, &mut rng).unwrap();
            assert!(orthogonality_defect(&w) <= 1e-12);
        }
    }

    #[test]
    fn haar_first_moment_vanishes() {
        // E[W00] = 0 under Haar; Var(W00) = 1/d.
        let d = 3;
        let n = 10_000;
        let mut rng = RngStream::new(99, 0);
        let mut sum = 0.0;
        for _ in 0..n {
            sum += sample_haar_orthogonal(d, &mut rng).unwrap()[(0, 0)];
        }
        let mean = sum / n as f64;
        let se = (1.0 / d as f64 / n as f64).sqrt();
        assert!(mean.abs() <= 3.0 * se, "mean {mean}, 3se {}", 3.0 * se);
    }

    #[test]
    fn spd_d1_is_positive_scalar() {
        let mut rng = RngStream::new(5, 0);
        let a = sample_spd_exp(1, &mut rng).unwrap();
        assert!(a.entry(0, 0) > 0.0);
    }

    #[test]
    fn spd_factorizes() {
        let mut rng = RngStream::new(6, 0);
        let a = sample_spd_exp(100, &mut rng).unwrap();
        assert!(SpdFactor::new(&a).is_ok());
    }

    #[test]
    fn spd_trace_matches_exp_mean() {
        // trace(A)/d averages E[Exp(1)] = 1 over draws.
        let d = 50;
        let draws = 5_000;
        let mut rng = RngStream::new(21, 0);
        let mut sum = 0.0;
        for _ in 0..draws {
            let (a, _) = sample_spd_exp_with_spectrum(d, &mut rng).unwrap();
            let trace: f64 = (0..d).map(|i| a.entry(i, i)).sum();
            sum += trace / d as f64;
        }
        let mean = sum / draws as f64;
        // Var(trace/d) = 1/d per draw
        let se = (1.0 / d as f64 / draws as f64).sqrt();
        assert!((mean - 1.0).abs() <= 3.0 * se, "mean {mean}");
    }

    #[test]
    fn spd_eigenvalues_are_the_sampled_spectrum() {
        let mut rng = RngStream::new(8, 0);
        let (a, mut spectrum) = sample_spd_exp_with_spectrum(15, &mut rng).unwrap();
        spectrum.sort_by(f64::total_cmp);
        let eig = nalgebra::SymmetricEigen::new(a.to_dmatrix());
        let mut got: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        got.sort_by(f64::total_cmp);
        for (g, s) in got.iter().zip(&spectrum) {
            assert!((g - s).abs() <= 1e-10 * s.max(1.0), "eig {g} vs drawn {s}");
        }
    }

    #[test]
    fn spd_reproducible() {
        let a = sample_spd_exp(12, &mut RngStream::new(17, 3)).unwrap();
        let b = sample_spd_exp(12, &mut RngStream::new(17, 3)).unwrap();
        assert_eq!(a, b);
    }
}
