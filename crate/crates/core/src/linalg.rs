//! Minimal dense linear algebra for the regression kernels.
//!
//! The fitting problems in this crate are small (designs of a few dozen
//! columns at most), so a plain row-major matrix with Cholesky-based solves
//! is sufficient and keeps the numerical path easy to audit.

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Build from row-major data. `data.len()` must equal `rows * cols`.
    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "matrix data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Build column-by-column.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::Dimension("matrix needs at least one column".into()));
        }
        let rows = columns[0].len();
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::Dimension("columns have unequal lengths".into()));
        }
        let cols = columns.len();
        let mut data = vec![0.0; rows * cols];
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                data[i * cols + j] = v;
            }
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Select a subset of rows (duplicates allowed, e.g. bootstrap resamples).
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Matrix { rows: rows.len(), cols: self.cols, data }
    }

    /// `X'X` of this matrix.
    pub fn xtx(&self) -> Matrix {
        self.xtwx(None)
    }

    /// `X'WX` with diagonal weights (or `X'X` when `weights` is `None`).
    pub fn xtwx(&self, weights: Option<&[f64]>) -> Matrix {
        let p = self.cols;
        let mut out = Matrix::zeros(p, p);
        for i in 0..self.rows {
            let w = weights.map_or(1.0, |ws| ws[i]);
            let row = self.row(i);
            for a in 0..p {
                let wa = w * row[a];
                for b in a..p {
                    out.data[a * p + b] += wa * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                out.data[a * p + b] = out.data[b * p + a];
            }
        }
        out
    }

    /// `X'y` (or `X'Wy` with diagonal weights).
    pub fn xtwy(&self, y: &[f64], weights: Option<&[f64]>) -> Vec<f64> {
        let p = self.cols;
        let mut out = vec![0.0; p];
        for i in 0..self.rows {
            let w = weights.map_or(1.0, |ws| ws[i]);
            let wy = w * y[i];
            let row = self.row(i);
            for a in 0..p {
                out[a] += row[a] * wy;
            }
        }
        out
    }

    /// Matrix-vector product `X b`.
    pub fn mat_vec(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.cols, "mat_vec dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(b).map(|(x, c)| x * c).sum())
            .collect()
    }

    /// Dense product `A B` (used only on small matrices).
    pub fn mat_mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "mat_mul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * out.cols + j] += aik * other.get(k, j);
                }
            }
        }
        out
    }
}

/// Cholesky factorization of a symmetric positive-definite matrix.
///
/// Fails with the offending pivot index when the matrix is (numerically)
/// singular, which callers map to rank-deficiency diagnostics.
#[derive(Debug)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub fn new(a: &Matrix) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::Dimension("cholesky requires a square matrix".into()));
        }
        let max_diag = (0..n).map(|i| a.get(i, i).abs()).fold(0.0_f64, f64::max);
        let tol = 1e-12 * max_diag.max(1e-300);
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                d -= l.get(j, k) * l.get(j, k);
            }
            if d <= tol {
                return Err(Error::RankDeficient(format!("pivot {}", j)));
            }
            let dsqrt = d.sqrt();
            l.set(j, j, dsqrt);
            for i in (j + 1)..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / dsqrt);
            }
        }
        Ok(Cholesky { l })
    }

    /// Solve `A x = b` using the factorization.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.rows();
        assert_eq!(b.len(), n);
        // forward: L z = b
        let mut z = vec![0.0; n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l.get(i, k) * z[k];
            }
            z[i] = s / self.l.get(i, i);
        }
        // backward: L' x = z
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in (i + 1)..n {
                s -= self.l.get(k, i) * x[k];
            }
            x[i] = s / self.l.get(i, i);
        }
        x
    }

    /// Inverse of the factored matrix.
    pub fn inverse(&self) -> Matrix {
        let n = self.l.rows();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv.set(i, j, col[i]);
            }
            e[j] = 0.0;
        }
        inv
    }
}

/// Solve the SPD system `A x = b`, reporting the failing pivot on
/// rank deficiency.
pub fn solve_spd(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    Ok(Cholesky::new(a)?.solve(b))
}

/// Extract the failing pivot/column index from a `RankDeficient` error
/// message (the trailing integer).
pub fn rank_deficient_pivot(err: &Error) -> Option<usize> {
    match err {
        Error::RankDeficient(msg) => msg.rsplit(' ').next().and_then(|s| s.parse().ok()),
        _ => None,
    }
}
