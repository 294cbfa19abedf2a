//! Symmetric positive definite operators and their support code.
//!
//! The solver stack only ever needs `A v` products, a direct solve used as
//! the exact reference, and random test matrices. Two storage layouts sit
//! behind one type: dense row-major symmetric (calibration experiments,
//! `d` around 100) and compressed sparse rows (finite-element systems).

mod factor;
mod io;
mod sample;

pub use factor::{compensated_residual, direct_solve, refine_solution, SpdFactor};
pub use io::{load_matrix, load_vector, write_matrix, write_vector};
pub use sample::{sample_haar_orthogonal, sample_spd_exp, sample_spd_exp_with_spectrum, spd_with_spectrum};

use nalgebra::DMatrix;
use thiserror::Error;

/// Relative tolerance of the symmetry invariant: stored entries must agree
/// with their transpose to 1e-12 of the largest entry magnitude.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not symmetric: asymmetry {defect:.3e} exceeds {tol:.3e}")]
    NotSymmetric { defect: f64, tol: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("invalid dimension {0}")]
    InvalidDimension(usize),
    #[error("non-finite entry at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("entry ({row}, {col}) outside matrix of dimension {dim}")]
    IndexOutOfBounds { row: usize, col: usize, dim: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Compressed-sparse-row storage of a square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds CSR storage from (row, col, value) triplets. Duplicate
    /// positions are summed; explicit zeros are dropped.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self, MatrixError> {
        if dim == 0 {
            return Err(MatrixError::InvalidDimension(0));
        }
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(i, j, v) in triplets {
            if i >= dim || j >= dim {
                return Err(MatrixError::IndexOutOfBounds { row: i, col: j, dim });
            }
            if !v.is_finite() {
                return Err(MatrixError::NonFiniteEntry { row: i, col: j });
            }
            entries.push((i, j, v));
        }
        entries.sort_by_key(|e| (e.0, e.1));

        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (i, j, v) in entries {
            match merged.last_mut() {
                Some((pi, pj, pv)) if *pi == i && *pj == j => *pv += v,
                _ => merged.push((i, j, v)),
            }
        }
        merged.retain(|&(_, _, v)| v != 0.0);

        let mut row_ptr = vec![0usize; dim + 1];
        for &(i, _, _) in &merged {
            row_ptr[i + 1] += 1;
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(CsrMatrix {
            dim,
            row_ptr,
            col_idx: merged.iter().map(|e| e.1).collect(),
            values: merged.iter().map(|e| e.2).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match row.binary_search(&j) {
            Ok(k) => self.values[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        for r in 0..self.dim {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * v[self.col_idx[k]];
            }
            out[r] = acc;
        }
    }

    fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn symmetry_defect(&self) -> f64 {
        let mut defect = 0.0f64;
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                defect = defect.max((self.values[k] - self.entry(j, i)).abs());
            }
        }
        defect
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    /// Row-major `dim * dim` buffer.
    Dense(Vec<f64>),
    Csr(CsrMatrix),
}

/// A symmetric positive definite operator: the `A` in `Ax = b`.
///
/// Symmetry is validated at construction; positive definiteness is
/// established by the first successful factorization ([`SpdFactor::new`]).
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    dim: usize,
    storage: Storage,
}

impl SpdMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        SpdMatrix { dim, storage: Storage::Dense(data) }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut data = vec![0.0; dim * dim];
        for (i, &v) in diag.iter().enumerate() {
            data[i * dim + i] = v;
        }
        SpdMatrix { dim, storage: Storage::Dense(data) }
    }

    /// Dense construction from a row-major buffer, validating symmetry.
    pub fn from_dense(dim: usize, data: Vec<f64>) -> Result<Self, MatrixError> {
        if dim == 0 {
            return Err(MatrixError::InvalidDimension(0));
        }
        if data.len() != dim * dim {
            return Err(MatrixError::DimensionMismatch { expected: dim * dim, found: data.len() });
        }
        for (k, v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(MatrixError::NonFiniteEntry { row: k / dim, col: k % dim });
            }
        }
        let m = SpdMatrix { dim, storage: Storage::Dense(data) };
        m.check_symmetry()?;
        Ok(m)
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Result<Self, MatrixError> {
        if m.nrows() != m.ncols() {
            return Err(MatrixError::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        let dim = m.nrows();
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                data[i * dim + j] = m[(i, j)];
            }
        }
        Self::from_dense(dim, data)
    }

    /// Sparse construction from triplets, validating symmetry.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self, MatrixError> {
        let csr = CsrMatrix::from_triplets(dim, triplets)?;
        let m = SpdMatrix { dim, storage: Storage::Csr(csr) };
        m.check_symmetry()?;
        Ok(m)
    }

    fn check_symmetry(&self) -> Result<(), MatrixError> {
        let tol = SYMMETRY_TOL * self.max_abs();
        let defect = self.symmetry_defect();
        if defect > tol {
            return Err(MatrixError::NotSymmetric { defect, tol });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Dense(data) => data.iter().filter(|v| **v != 0.0).count(),
            Storage::Csr(csr) => csr.nnz(),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Dense(data) => data[i * self.dim + j],
            Storage::Csr(csr) => csr.entry(i, j),
        }
    }

    pub fn max_abs(&self) -> f64 {
        match &self.storage {
            Storage::Dense(data) => data.iter().fold(0.0, |m, v| m.max(v.abs())),
            Storage::Csr(csr) => csr.max_abs(),
        }
    }

    pub fn symmetry_defect(&self) -> f64 {
        match &self.storage {
            Storage::Dense(data) => {
                let mut defect = 0.0f64;
                for i in 0..self.dim {
                    for j in (i + 1)..self.dim {
                        defect = defect.max((data[i * self.dim + j] - data[j * self.dim + i]).abs());
                    }
                }
                defect
            }
            Storage::Csr(csr) => csr.symmetry_defect(),
        }
    }

    /// Matrix-vector product `A v`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>, MatrixError> {
        if v.len() != self.dim {
            return Err(MatrixError::DimensionMismatch { expected: self.dim, found: v.len() });
        }
        let mut out = vec![0.0; self.dim];
        self.apply_into(v, &mut out);
        Ok(out)
    }

    /// Unchecked product into a caller-provided buffer; hot path for the
    /// Krylov iteration after dimensions have been validated once.
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        match &self.storage {
            Storage::Dense(data) => {
                for r in 0..self.dim {
                    let row = &data[r * self.dim..(r + 1) * self.dim];
                    out[r] = crate::vecops::dot(row, v);
                }
            }
            Storage::Csr(csr) => csr.apply_into(v, out),
        }
    }

    /// Quadratic form `xᵀ A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64, MatrixError> {
        let ax = self.matvec(x)?;
        Ok(crate::vecops::dot(x, &ax))
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        match &self.storage {
            Storage::Dense(data) => DMatrix::from_fn(self.dim, self.dim, |i, j| data[i * self.dim + j]),
            Storage::Csr(csr) => {
                let mut m = DMatrix::zeros(self.dim, self.dim);
                for (i, j, v) in csr.triplets() {
                    m[(i, j)] = v;
                }
                m
            }
        }
    }

    pub fn as_csr(&self) -> Option<&CsrMatrix> {
        match &self.storage {
            Storage::Csr(csr) => Some(csr),
            Storage::Dense(_) => None,
        }
    }
}
