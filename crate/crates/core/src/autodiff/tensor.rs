use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ShapeError;

/// Row-major matrix of `f64`. Vectors are `1 x n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Tensor, ShapeError> {
        if rows * cols != data.len() {
            return Err(ShapeError { op: "tensor", detail: format!("{rows}x{cols} needs {} values, got {}", rows * cols, data.len()) });
        }
        Ok(Tensor { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Tensor {
        Tensor { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn scalar(v: f64) -> Tensor {
        Tensor { rows: 1, cols: 1, data: vec![v] }
    }

    pub fn row(data: Vec<f64>) -> Tensor {
        Tensor { rows: 1, cols: data.len(), data }
    }

    /// Stacks equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Tensor, ShapeError> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(ShapeError { op: "from_rows", detail: format!("row of {} values among rows of {cols}", bad.len()) });
        }
        Ok(Tensor { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn uniform(rows: usize, cols: usize, limit: f64, rng: &mut impl Rng) -> Tensor {
        let data = (0..rows * cols).map(|_| rng.gen_range(-limit..=limit)).collect();
        Tensor { rows, cols, data }
    }

    /// Glorot/Xavier uniform: `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
        Tensor::uniform(rows, cols, (6.0 / (rows + cols) as f64).sqrt(), rng)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// `self (m x k) * other (k x n)`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor, ShapeError> {
        if self.cols != other.rows {
            return Err(ShapeError { op: "matmul", detail: format!("{}x{} by {}x{}", self.rows, self.cols, other.rows, other.cols) });
        }
        let mut out = Tensor::zeros(self.rows, other.cols);
        gemm_acc(self.rows, self.cols, other.cols, Layout::normal(self), Layout::normal(other), &mut out.data);
        Ok(out)
    }
}

/// Strides of a matrix operand as seen by the kernel.
#[derive(Clone, Copy)]
pub(crate) struct Layout<'a> {
    data: &'a [f64],
    row_stride: isize,
    col_stride: isize,
}

impl<'a> Layout<'a> {
    pub(crate) fn normal(t: &'a Tensor) -> Self {
        Layout { data: &t.data, row_stride: t.cols as isize, col_stride: 1 }
    }

    pub(crate) fn transposed(t: &'a Tensor) -> Self {
        Layout { data: &t.data, row_stride: 1, col_stride: t.cols as isize }
    }
}

/// `out (m x n) += a (m x k) * b (k x n)` with arbitrary operand strides.
pub(crate) fn gemm_acc(m: usize, k: usize, n: usize, a: Layout<'_>, b: Layout<'_>, out: &mut [f64]) {
    assert!(out.len() == m * n && a.data.len() >= m * k && b.data.len() >= k * n);
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    // SAFETY: the slices cover every element addressed by the given dimensions and
    // strides (checked above), and `out` does not alias the inputs.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            a.row_stride,
            a.col_stride,
            b.data.as_ptr(),
            b.row_stride,
            b.col_stride,
            1.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
