//! Small dense symmetric-matrix helpers on top of `nalgebra`.

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("malformed matrix CSV: {0}")]
    Csv(String),
}

/// Eigen-decomposition with eigenvalues sorted in descending order.
///
/// Column `k` of the returned matrix is the unit eigenvector for `values[k]`.
#[derive(Debug, Clone)]
pub struct SortedEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl SortedEigen {
    pub fn new(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        // Symmetrize first; the decomposition reads only one triangle otherwise.
        let sym = (m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Self { values, vectors }
    }

    /// `V diag(f(λ)) Vᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let n = self.values.len();
        let mut out = DMatrix::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            let v = self.vectors.column(k);
            out += (v * v.transpose()) * f(lam);
        }
        out
    }
}

pub fn check_symmetric(m: &DMatrix<f64>, tol: f64) -> Result<(), LinalgError> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    let asym = max_asymmetry(m);
    let scale = m.amax().max(1.0);
    if asym > tol * scale {
        return Err(LinalgError::NotSymmetric(asym));
    }
    Ok(())
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// `|M|^s` for symmetric `M`, through the spectral decomposition.
pub fn abs_pow(m: &DMatrix<f64>, s: f64) -> DMatrix<f64> {
    SortedEigen::new(m).map(|lam| lam.abs().powf(s))
}

/// `M^s` for a PSD matrix; eigenvalues below zero are clamped first.
pub fn psd_pow(m: &DMatrix<f64>, s: f64) -> DMatrix<f64> {
    SortedEigen::new(m).map(|lam| lam.max(0.0).powf(s))
}

pub fn frobenius_sq(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x * x).sum()
}

/// Row-major CSV, one matrix row per line.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| crate::io::fmt_f64(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<DMatrix<f64>, LinalgError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|e| LinalgError::Csv(format!("line {}: {e}", lineno + 1)))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(LinalgError::Csv(format!("line {}: ragged row", lineno + 1)));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(LinalgError::Csv("empty matrix".into()));
    }
    let (r, c) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_row_iterator(r, c, rows.into_iter().flatten()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_descending() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 2.0]);
        let e = SortedEigen::new(&m);
        assert_eq!(e.values, vec![3.0, 2.0, 1.0]);
        let back = e.map(|x| x);
        assert!((back - m).amax() < 1e-14);
    }

    #[test]
    fn abs_pow_of_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 2.0, 0.0]);
        // eigenvalues ±2, so |M| = 2I
        let a = abs_pow(&m, 1.0);
        assert!((a - DMatrix::identity(2, 2) * 2.0).amax() < 1e-13);
    }

    #[test]
    fn csv_round_trip() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, -2.5, 3.0e-7, 0.1, 0.2, 1.0 / 3.0]);
        let back = matrix_from_csv(&matrix_to_csv(&m)).unwrap();
        assert_eq!(m, back);
        assert!(matrix_from_csv("1,2\n3\n").is_err());
        assert!(matrix_from_csv("").is_err());
    }

    #[test]
    fn symmetry_check() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(check_symmetric(&m, 1e-12), Err(LinalgError::NotSymmetric(_))));
        let r = DMatrix::<f64>::zeros(2, 3);
        assert!(matches!(check_symmetric(&r, 1e-12), Err(LinalgError::NotSquare { .. })));
    }
}
