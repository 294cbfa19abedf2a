//! Plain-text load/store.
//!
//! Matrices use a matrix-market style triplet format: a header line
//! `d nnz`, then one `i j value` line per stored entry, 0-based indices.
//! Vectors are one float per line. Floats are written with Rust's
//! shortest round-trip formatting, so save/load is bit-exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{MatrixError, SpdMatrix};

pub fn write_matrix(a: &SpdMatrix, path: &Path) -> Result<(), MatrixError> {
    let mut w = BufWriter::new(File::create(path)?);
    let d = a.dim();
    let mut entries = Vec::new();
    for i in 0..d {
        for j in 0..d {
            let v = a.entry(i, j);
            if v != 0.0 {
                entries.push((i, j, v));
            }
        }
    }
    writeln!(w, "{} {}", d, entries.len())?;
    for (i, j, v) in entries {
        writeln!(w, "{} {} {}", i, j, v)?;
    }
    Ok(())
}

/// Loads a matrix written by [`write_matrix`]. The result uses sparse
/// storage; symmetry is re-validated on construction.
pub fn load_matrix(path: &Path) -> Result<SpdMatrix, MatrixError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();

    let (_, header) = lines.next().ok_or(MatrixError::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let header = header?;
    let mut parts = header.split_whitespace();
    let parse_usize = |tok: Option<&str>, line: usize| -> Result<usize, MatrixError> {
        tok.ok_or(MatrixError::Parse { line, message: "missing field".into() })?
            .parse()
            .map_err(|e| MatrixError::Parse { line, message: format!("{e}") })
    };
    let d = parse_usize(parts.next(), 1)?;
    let nnz = parse_usize(parts.next(), 1)?;

    let mut triplets = Vec::with_capacity(nnz);
    for (idx, line) in lines {
        let line = line?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let i = parse_usize(parts.next(), line_no)?;
        let j = parse_usize(parts.next(), line_no)?;
        let v: f64 = parts
            .next()
            .ok_or(MatrixError::Parse { line: line_no, message: "missing value".into() })?
            .parse()
            .map_err(|e| MatrixError::Parse { line: line_no, message: format!("{e}") })?;
        triplets.push((i, j, v));
    }
    if triplets.len() != nnz {
        return Err(MatrixError::Parse {
            line: 1,
            message: format!("header declares {} entries, found {}", nnz, triplets.len()),
        });
    }
    SpdMatrix::from_triplets(d, &triplets)
}

pub fn write_vector(v: &[f64], path: &Path) -> Result<(), MatrixError> {
    let mut w = BufWriter::new(File::create(path)?);
    for x in v {
        writeln!(w, "{}", x)?;
    }
    Ok(())
}

pub fn load_vector(path: &Path) -> Result<Vec<f64>, MatrixError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let x: f64 = line.trim().parse().map_err(|e| MatrixError::Parse {
            line: idx + 1,
            message: format!("{e}"),
        })?;
        out.push(x);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::sample_spd_exp;
    use crate::rng::RngStream;

    #[test]
    fn matrix_roundtrip_is_bit_exact() {
        let dir = std::env::temp_dir().join("bayescg-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("a.mtx");

        let mut rng = RngStream::new(4, 0);
        let a = sample_spd_exp(9, &mut rng).unwrap();
        write_matrix(&a, &path).unwrap();
        let b = load_matrix(&path).unwrap();
        assert_eq!(a.dim(), b.dim());
        for i in 0..9 {
            for j in 0..9 {
                assert_eq!(a.entry(i, j).to_bits(), b.entry(i, j).to_bits());
            }
        }
    }

    #[test]
    fn vector_roundtrip() {
        let dir = std::env::temp_dir().join("bayescg-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("v.txt");
        let v = vec![1.5, -2.25, 1e-17, 3.0];
        write_vector(&v, &path).unwrap();
        assert_eq!(load_vector(&path).unwrap(), v);
    }

    #[test]
    fn bad_header_is_parse_error() {
        let dir = std::env::temp_dir().join("bayescg-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.mtx");
        std::fs::write(&path, "not a header\n").unwrap();
        assert!(matches!(load_matrix(&path), Err(MatrixError::Parse { .. })));
    }
}
