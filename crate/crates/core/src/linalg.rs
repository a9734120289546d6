//! Dense row-major matrices and the handful of kernels the maximizers need.
//!
//! Every accumulation runs left to right starting from `0.0`. The batch
//! greedy relies on this: a diagonal entry of `Uᵀ A U` computed through
//! [`gemm_blocked`] is bit-identical to [`quadratic_form`] on the same column.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
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

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn scaled(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// `self += alpha · u uᵀ`.
    pub fn add_outer(&mut self, alpha: f64, u: &[f64]) {
        debug_assert!(self.is_square() && u.len() == self.rows);
        for (i, ui) in u.iter().enumerate() {
            let coef = alpha * ui;
            for (dst, uj) in self.row_mut(i).iter_mut().zip(u) {
                *dst += coef * uj;
            }
        }
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of the symmetric part `(A + Aᵀ)/2`.
    pub fn min_symmetric_eigenvalue(&self) -> f64 {
        debug_assert!(self.is_square());
        let n = self.rows;
        let sym = nalgebra::DMatrix::from_fn(n, n, |i, j| 0.5 * (self[(i, j)] + self[(j, i)]));
        sym.symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

pub fn norm_squared(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_squared(a).sqrt()
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let diff = x - y;
        acc += diff * diff;
    }
    acc
}

/// `uᵀ A u` evaluated as `Σ_r u_r (Σ_c A_rc u_c)`.
pub fn quadratic_form(a: &Matrix, u: &[f64]) -> f64 {
    debug_assert!(a.is_square() && a.rows() == u.len());
    let mut total = 0.0;
    for (r, ur) in u.iter().enumerate() {
        let mut inner = 0.0;
        for (arc, uc) in a.row(r).iter().zip(u) {
            inner += arc * uc;
        }
        total += ur * inner;
    }
    total
}

/// Reference triple loop.
pub fn gemm_naive(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.cols(), b.rows());
    let mut c = Matrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut acc = 0.0;
            for k in 0..a.cols() {
                acc += a[(i, k)] * b[(k, j)];
            }
            c[(i, j)] = acc;
        }
    }
    c
}

pub const DEFAULT_TILE: usize = 64;

/// Tiled `A · B` in i-k-j order. Each output entry accumulates over `k` in
/// ascending order, so results match [`gemm_naive`] exactly.
pub fn gemm_blocked(a: &Matrix, b: &Matrix, tile: usize) -> Matrix {
    assert_eq!(a.cols(), b.rows());
    let tile = tile.max(1);
    let (m, kdim, n) = (a.rows(), a.cols(), b.cols());
    let mut c = Matrix::zeros(m, n);
    for i0 in (0..m).step_by(tile) {
        let i1 = (i0 + tile).min(m);
        for k0 in (0..kdim).step_by(tile) {
            let k1 = (k0 + tile).min(kdim);
            for j0 in (0..n).step_by(tile) {
                let j1 = (j0 + tile).min(n);
                for i in i0..i1 {
                    let a_row = a.row(i);
                    let c_row = &mut c.data[i * n..(i + 1) * n];
                    for (k, aik) in a_row.iter().enumerate().take(k1).skip(k0) {
                        let b_row = &b.data[k * n..(k + 1) * n];
                        for j in j0..j1 {
                            c_row[j] += aik * b_row[j];
                        }
                    }
                }
            }
        }
    }
    c
}
