use std::fmt;

use rayon::prelude::*;

use super::TapeError;
use crate::Scalar;

/// Row-count threshold above which dense kernels fan out over rayon.
const PAR_ROWS: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    pub rows: usize,
    pub cols: usize,
}

impl Shape {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    /// Builds a tensor from row-major values, rejecting bad lengths and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, TapeError> {
        if data.len() != rows * cols {
            return Err(TapeError::Length {
                shape: Shape::new(rows, cols),
                len: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(TapeError::NonFinite {
                context: "tensor creation",
                index: pos,
            });
        }
        Ok(Self::from_raw(rows, cols, data))
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self {
            shape: Shape::new(rows, cols),
            data,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, T::zero())
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, T::one())
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self::from_raw(rows, cols, vec![value; rows * cols])
    }

    pub fn scalar(value: T) -> Self {
        Self::from_raw(1, 1, vec![value])
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self::from_raw(rows, cols, data)
    }

    /// Column vector.
    pub fn column(values: Vec<T>) -> Result<Self, TapeError> {
        let n = values.len();
        Self::new(n, 1, values)
    }

    /// Row vector.
    pub fn row_vector(values: Vec<T>) -> Result<Self, TapeError> {
        let n = values.len();
        Self::new(1, n, values)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn rows(&self) -> usize {
        self.shape.rows
    }

    pub fn cols(&self) -> usize {
        self.shape.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.shape.cols + c]
    }

    pub fn row(&self, r: usize) -> &[T] {
        let c = self.shape.cols;
        &self.data[r * c..(r + 1) * c]
    }

    /// The single entry of a 1x1 tensor.
    pub fn item(&self) -> Option<T> {
        (self.shape == Shape::new(1, 1)).then(|| self.data[0])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn reshaped(mut self, rows: usize, cols: usize) -> Self {
        assert_eq!(rows * cols, self.shape.len(), "reshape must keep length");
        self.shape = Shape::new(rows, cols);
        self
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_raw(
            self.rows(),
            self.cols(),
            self.data.iter().map(|&x| f(x)).collect(),
        )
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert_eq!(self.shape, other.shape);
        Self::from_raw(
            self.rows(),
            self.cols(),
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub(crate) fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn sum(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &x| acc + x)
    }

    pub fn transpose(&self) -> Self {
        let (r, c) = (self.rows(), self.cols());
        Self::from_fn(c, r, |i, j| self.get(j, i))
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Self) -> Self {
        let (n, k, m) = (self.rows(), self.cols(), other.cols());
        debug_assert_eq!(k, other.rows());
        let mut out = vec![T::zero(); n * m];
        let kernel = |(r, out_row): (usize, &mut [T])| {
            let a_row = self.row(r);
            for (p, &a) in a_row.iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(p)) {
                    *o += a * b;
                }
            }
        };
        if m == 0 {
            return Self::from_raw(n, m, out);
        }
        if n >= PAR_ROWS {
            out.par_chunks_mut(m).enumerate().for_each(kernel);
        } else {
            out.chunks_mut(m).enumerate().for_each(kernel);
        }
        Self::from_raw(n, m, out)
    }

    /// `selfᵀ · other`, accumulated over rows in order.
    pub fn t_matmul(&self, other: &Self) -> Self {
        let (n, k, m) = (self.rows(), self.cols(), other.cols());
        debug_assert_eq!(n, other.rows());
        let mut out = vec![T::zero(); k * m];
        if m == 0 {
            return Self::from_raw(k, m, out);
        }
        let kernel = |(p, out_row): (usize, &mut [T])| {
            for r in 0..n {
                let a = self.get(r, p);
                if a == T::zero() {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(r)) {
                    *o += a * b;
                }
            }
        };
        if n * k >= PAR_ROWS * 64 {
            out.par_chunks_mut(m).enumerate().for_each(kernel);
        } else {
            out.chunks_mut(m).enumerate().for_each(kernel);
        }
        Self::from_raw(k, m, out)
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(&self, other: &Self) -> Self {
        let (n, k, m) = (self.rows(), self.cols(), other.rows());
        debug_assert_eq!(k, other.cols());
        let mut out = vec![T::zero(); n * m];
        if m == 0 {
            return Self::from_raw(n, m, out);
        }
        let kernel = |(r, out_row): (usize, &mut [T])| {
            let a_row = self.row(r);
            for (q, o) in out_row.iter_mut().enumerate() {
                *o = a_row
                    .iter()
                    .zip(other.row(q))
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b);
            }
        };
        if n >= PAR_ROWS {
            out.par_chunks_mut(m).enumerate().for_each(kernel);
        } else {
            out.chunks_mut(m).enumerate().for_each(kernel);
        }
        Self::from_raw(n, m, out)
    }
}
