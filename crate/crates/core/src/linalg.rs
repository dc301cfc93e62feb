//! Small dense linear algebra: a row-major matrix, Householder QR least
//! squares, cyclic Jacobi for symmetric eigenproblems, and a thin SVD for
//! matrices with at most four columns.
//!
//! Sizes here are tiny (a handful of regressors, four themes), so plain
//! loops over a `Vec<f64>` are all that is needed.

use std::fmt;
use std::ops::{Index, IndexMut};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("least squares needs rows >= cols, got {rows}x{cols}")]
    Underdetermined { rows: usize, cols: usize },
    #[error("column {column} is collinear with earlier columns (|R_kk| = {r_kk:e}, max |R| = {r_max:e})")]
    Collinear { column: usize, r_kk: f64, r_max: f64 },
    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },
    #[error("svd_small supports at most {max} columns, got {cols}")]
    TooManyColumns { cols: usize, max: usize },
    #[error("non-finite entry in input")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, LinalgError>;

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Matrix {
        assert_eq!(data.len(), rows * cols, "row-major buffer has wrong length");
        Matrix { rows, cols, data }
    }

    /// Build from row slices; every row must have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Matrix {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Matrix {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        let mut m = Matrix::zeros(rows, cols);
        for (j, c) in columns.iter().enumerate() {
            assert_eq!(c.len(), rows, "ragged columns");
            for (i, v) in c.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// Relative size below which a diagonal entry of R marks a collinear column.
pub const COLLINEARITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub beta: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Upper-triangular factor (cols × cols) with XᵀX = RᵀR.
    pub r: Matrix,
}

impl LeastSquares {
    /// (XᵀX)⁻¹ = R⁻¹R⁻ᵀ.
    pub fn xtx_inverse(&self) -> Matrix {
        xtx_inverse_from_r(&self.r)
    }
}

/// Solve min ‖y − Xβ‖² by Householder QR without pivoting.
///
/// A column whose |R_kk| falls below 1e-10·max|R| is reported as collinear.
pub fn householder_lstsq(x: &Matrix, y: &[f64]) -> Result<LeastSquares> {
    let (m, n) = (x.rows(), x.cols());
    if y.len() != m {
        return Err(LinalgError::DimensionMismatch(format!(
            "X has {m} rows but y has {} entries",
            y.len()
        )));
    }
    if m < n || n == 0 {
        return Err(LinalgError::Underdetermined { rows: m, cols: n });
    }
    if x.as_slice().iter().chain(y).any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }

    let mut a = x.clone();
    let mut qty = y.to_vec();
    let mut v = vec![0.0; m];
    for k in 0..n {
        let norm = (k..m).map(|i| a[(i, k)] * a[(i, k)]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[(k, k)] > 0.0 { -norm } else { norm };
        for i in k..m {
            v[i] = a[(i, k)];
        }
        v[k] -= alpha;
        let vnorm2: f64 = (k..m).map(|i| v[i] * v[i]).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..n {
            let dot: f64 = (k..m).map(|i| v[i] * a[(i, j)]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..m {
                a[(i, j)] -= f * v[i];
            }
        }
        let dot: f64 = (k..m).map(|i| v[i] * qty[i]).sum();
        let f = 2.0 * dot / vnorm2;
        for i in k..m {
            qty[i] -= f * v[i];
        }
    }

    let mut r = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            r[(i, j)] = a[(i, j)];
        }
    }
    let r_max = r.max_abs();
    for k in 0..n {
        let r_kk = r[(k, k)].abs();
        if r_max == 0.0 || r_kk < COLLINEARITY_TOL * r_max {
            return Err(LinalgError::Collinear {
                column: k,
                r_kk,
                r_max,
            });
        }
    }

    let mut beta = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| r[(i, j)] * beta[j]).sum();
        beta[i] = (qty[i] - s) / r[(i, i)];
    }
    let fitted = x.matvec(&beta);
    let residuals = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    Ok(LeastSquares { beta, residuals, r })
}

/// Inverse of an upper-triangular matrix by back substitution.
pub fn upper_triangular_inverse(r: &Matrix) -> Matrix {
    let n = r.rows();
    let mut inv = Matrix::zeros(n, n);
    for col in 0..n {
        for i in (0..=col).rev() {
            let rhs = if i == col { 1.0 } else { 0.0 };
            let s: f64 = (i + 1..=col).map(|j| r[(i, j)] * inv[(j, col)]).sum();
            inv[(i, col)] = (rhs - s) / r[(i, i)];
        }
    }
    inv
}

pub fn xtx_inverse_from_r(r: &Matrix) -> Matrix {
    let rinv = upper_triangular_inverse(r);
    rinv.matmul(&rinv.transpose())
}

pub const JACOBI_MAX_SWEEPS: usize = 100;
pub const JACOBI_TOL: f64 = 1e-14;

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Iterates until the off-diagonal norm is below 1e-14 times the Frobenius
/// norm of the input. Eigenvalues come back unsorted, paired with the columns
/// of the returned eigenvector matrix.
pub fn symmetric_eigen(sym: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = sym.rows();
    if sym.cols() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "symmetric_eigen needs a square matrix, got {}x{}",
            sym.rows(),
            sym.cols()
        )));
    }
    if sym.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let mut a = sym.clone();
    let mut v = Matrix::identity(n);
    let scale = a.frobenius_norm();
    let target = JACOBI_TOL * scale;

    let mut off = off_diagonal_norm(&a);
    let mut sweeps = 0;
    while off > target {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(LinalgError::NoConvergence {
                sweeps,
                off_norm: off,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // A ← JᵀAJ applied as row then column rotations.
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        off = off_diagonal_norm(&a);
    }
    let values = (0..n).map(|i| a[(i, i)]).collect();
    Ok((values, v))
}

pub const SVD_MAX_COLS: usize = 4;
/// Singular values at or below this are treated as zero and their triplets
/// omitted.
pub const SVD_ZERO_TOL: f64 = 1e-12;

/// Thin SVD `S = U Σ Vᵀ` restricted to the nonzero singular values.
#[derive(Debug, Clone)]
pub struct Svd {
    /// m × r
    pub u: Matrix,
    /// r values, descending
    pub singular_values: Vec<f64>,
    /// n × r
    pub v: Matrix,
}

impl Svd {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for j in 0..us.cols() {
            for i in 0..us.rows() {
                us[(i, j)] *= self.singular_values[j];
            }
        }
        us.matmul(&self.v.transpose())
    }
}

/// SVD of a matrix with at most four columns via the eigen-decomposition of
/// SᵀS.
///
/// σ_k = √λ_k; U's columns are S v_k / σ_k for σ_k > 1e-12, and triplets with
/// smaller σ are dropped. Each V column is signed so its largest-magnitude
/// entry is positive.
pub fn svd_small(s: &Matrix) -> Result<Svd> {
    let (m, n) = (s.rows(), s.cols());
    if n > SVD_MAX_COLS {
        return Err(LinalgError::TooManyColumns {
            cols: n,
            max: SVD_MAX_COLS,
        });
    }
    let gram = s.transpose().matmul(s);
    let (values, vecs) = symmetric_eigen(&gram)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));

    let mut sigmas = Vec::new();
    let mut v_cols: Vec<Vec<f64>> = Vec::new();
    let mut u_cols: Vec<Vec<f64>> = Vec::new();
    for &k in &order {
        let sigma = values[k].max(0.0).sqrt();
        if sigma <= SVD_ZERO_TOL {
            continue;
        }
        let mut vk = vecs.column(k);
        let pivot = vk
            .iter()
            .enumerate()
            .fold(0, |best, (i, x)| if x.abs() > vk[best].abs() { i } else { best });
        if vk[pivot] < 0.0 {
            vk.iter_mut().for_each(|x| *x = -*x);
        }
        let uk: Vec<f64> = s.matvec(&vk).into_iter().map(|x| x / sigma).collect();
        sigmas.push(sigma);
        v_cols.push(vk);
        u_cols.push(uk);
    }
    let u = if u_cols.is_empty() {
        Matrix::zeros(m, 0)
    } else {
        Matrix::from_columns(&u_cols)
    };
    let v = if v_cols.is_empty() {
        Matrix::zeros(n, 0)
    } else {
        Matrix::from_columns(&v_cols)
    };
    Ok(Svd {
        u,
        singular_values: sigmas,
        v,
    })
}
