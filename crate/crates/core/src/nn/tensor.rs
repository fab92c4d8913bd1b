//! Dense row-major containers and the handful of BLAS-like kernels the
//! network needs.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{shape_err, Result};

/// Dense row-major `rows × cols` matrix of `f64`.
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

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(shape_err!("{} values for a {rows}x{cols} matrix", data.len()));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Matrix::from_fn(n, n, |r, c| if r == c { 1.0 } else { 0.0 })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    /// `self · rhs`.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        self.matmul_into(rhs, &mut out, false)?;
        Ok(out)
    }

    /// `out (+)= self · rhs`; accumulates when `accumulate` is set.
    pub fn matmul_into(&self, rhs: &Matrix, out: &mut Matrix, accumulate: bool) -> Result<()> {
        if self.cols != rhs.rows || out.rows != self.rows || out.cols != rhs.cols {
            return Err(shape_err!(
                "matmul {}x{} · {}x{} -> {}x{}",
                self.rows,
                self.cols,
                rhs.rows,
                rhs.cols,
                out.rows,
                out.cols
            ));
        }
        if !accumulate {
            out.fill(0.0);
        }
        let n = rhs.cols;
        for r in 0..self.rows {
            let a_row = &self.data[r * self.cols..(r + 1) * self.cols];
            let o_row = &mut out.data[r * n..(r + 1) * n];
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = &rhs.data[k * n..(k + 1) * n];
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(())
    }

    /// `out += selfᵀ · rhs` (used for weight gradients).
    pub fn t_matmul_acc(&self, rhs: &Matrix, out: &mut Matrix) -> Result<()> {
        if self.rows != rhs.rows || out.rows != self.cols || out.cols != rhs.cols {
            return Err(shape_err!(
                "t_matmul {}x{}ᵀ · {}x{} -> {}x{}",
                self.rows,
                self.cols,
                rhs.rows,
                rhs.cols,
                out.rows,
                out.cols
            ));
        }
        let n = rhs.cols;
        for r in 0..self.rows {
            let a_row = &self.data[r * self.cols..(r + 1) * self.cols];
            let b_row = &rhs.data[r * n..(r + 1) * n];
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let o_row = &mut out.data[k * n..(k + 1) * n];
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(())
    }

    /// `out (+)= self · rhsᵀ` (used for input gradients).
    pub fn matmul_t_into(&self, rhs: &Matrix, out: &mut Matrix, accumulate: bool) -> Result<()> {
        if self.cols != rhs.cols || out.rows != self.rows || out.cols != rhs.rows {
            return Err(shape_err!(
                "matmul_t {}x{} · {}x{}ᵀ -> {}x{}",
                self.rows,
                self.cols,
                rhs.rows,
                rhs.cols,
                out.rows,
                out.cols
            ));
        }
        if !accumulate {
            out.fill(0.0);
        }
        for r in 0..self.rows {
            let a_row = &self.data[r * self.cols..(r + 1) * self.cols];
            if a_row.iter().all(|&a| a == 0.0) {
                continue;
            }
            for c in 0..rhs.rows {
                let b_row = &rhs.data[c * rhs.cols..(c + 1) * rhs.cols];
                let dot: f64 = a_row.iter().zip(b_row).map(|(a, b)| a * b).sum();
                out.data[r * out.cols + c] += dot;
            }
        }
        Ok(())
    }

    pub fn matmul_t(&self, rhs: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(self.rows, rhs.rows);
        self.matmul_t_into(rhs, &mut out, false)?;
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn add_assign(&mut self, rhs: &Matrix) -> Result<()> {
        if self.shape() != rhs.shape() {
            return Err(shape_err!("add {:?} + {:?}", self.shape(), rhs.shape()));
        }
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    /// Horizontal concatenation `[self | rhs]`.
    pub fn hcat(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.rows != rhs.rows {
            return Err(shape_err!("hcat rows {} vs {}", self.rows, rhs.rows));
        }
        let cols = self.cols + rhs.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(rhs.row(r));
        }
        Ok(Matrix { rows: self.rows, cols, data })
    }

    /// Splits columns at `at`, the inverse of [`Matrix::hcat`].
    pub fn hsplit(&self, at: usize) -> (Matrix, Matrix) {
        let left = Matrix::from_fn(self.rows, at, |r, c| self.get(r, c));
        let right = Matrix::from_fn(self.rows, self.cols - at, |r, c| self.get(r, at + c));
        (left, right)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| if x.abs() > m { x.abs() } else { m })
    }
}

/// Rank-3 tensor `d0 × d1 × d2` in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: (usize, usize, usize),
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(d0: usize, d1: usize, d2: usize) -> Self {
        Tensor3 { dims: (d0, d1, d2), data: vec![0.0; d0 * d1 * d2] }
    }

    pub fn from_vec(dims: (usize, usize, usize), data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.0 * dims.1 * dims.2 {
            return Err(shape_err!("{} values for a {:?} tensor", data.len(), dims));
        }
        Ok(Tensor3 { dims, data })
    }

    /// Stacks equally shaped matrices along a new leading axis.
    pub fn stack(slices: &[Matrix]) -> Result<Self> {
        let Some(first) = slices.first() else {
            return Ok(Tensor3::zeros(0, 0, 0));
        };
        let (r, c) = first.shape();
        let mut data = Vec::with_capacity(slices.len() * r * c);
        for m in slices {
            if m.shape() != (r, c) {
                return Err(shape_err!("stack {:?} vs {:?}", m.shape(), (r, c)));
            }
            data.extend_from_slice(m.as_slice());
        }
        Ok(Tensor3 { dims: (slices.len(), r, c), data })
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        let (_, d1, d2) = self.dims;
        self.data[(i * d1 + j) * d2 + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let (_, d1, d2) = self.dims;
        self.data[(i * d1 + j) * d2 + k] = v;
    }

    /// Copies out the `d1 × d2` matrix at leading index `i`.
    pub fn slice(&self, i: usize) -> Matrix {
        let (_, d1, d2) = self.dims;
        Matrix { rows: d1, cols: d2, data: self.data[i * d1 * d2..(i + 1) * d1 * d2].to_vec() }
    }

    pub fn slice_rows(&self, i: usize) -> &[f64] {
        let (_, d1, d2) = self.dims;
        &self.data[i * d1 * d2..(i + 1) * d1 * d2]
    }

    /// Copies out the `d0 × d2` matrix at middle index `j`.
    pub fn slice_axis1(&self, j: usize) -> Matrix {
        let (d0, _, d2) = self.dims;
        Matrix::from_fn(d0, d2, |i, k| self.get(i, j, k))
    }

    pub fn set_slice_axis1(&mut self, j: usize, m: &Matrix) {
        let (d0, _, d2) = self.dims;
        debug_assert_eq!(m.shape(), (d0, d2));
        for i in 0..d0 {
            for k in 0..d2 {
                self.set(i, j, k, m.get(i, k));
            }
        }
    }

    pub fn into_slices(self) -> Vec<Matrix> {
        let (d0, d1, d2) = self.dims;
        (0..d0)
            .map(|i| Matrix { rows: d1, cols: d2, data: self.data[i * d1 * d2..(i + 1) * d1 * d2].to_vec() })
            .collect()
    }
}

/// Swaps the two leading axes: `B × N × K ↔ N × B × K`.
pub fn transpose01(x: &Tensor3) -> Tensor3 {
    let (d0, d1, d2) = x.dims;
    let mut data = Vec::with_capacity(x.data.len());
    for j in 0..d1 {
        for i in 0..d0 {
            let start = (i * d1 + j) * d2;
            data.extend_from_slice(&x.data[start..start + d2]);
        }
    }
    Tensor3 { dims: (d1, d0, d2), data }
}
