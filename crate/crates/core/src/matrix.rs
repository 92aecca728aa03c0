//! Dense column-major complex matrices.
//!
//! Everything in this crate is expressed over `Complex64`; real data is
//! embedded with zero imaginary parts. Storage is column-major so that a
//! contiguous column range is also a contiguous slice.

use std::fmt;
use std::ops::{Index, IndexMut, Range};

use num_complex::Complex64;

use crate::error::{shape_mismatch, Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::eye(n, n)
    }

    /// The leading `cols` columns of the `rows x rows` identity.
    pub fn eye(rows: usize, cols: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        for j in 0..rows.min(cols) {
            m[(j, j)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                op: "Matrix::from_col_major",
                expected: format!("{} entries", rows * cols),
                found: format!("{} entries", data.len()),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row vectors. All rows must have equal length.
    pub fn from_rows<R: AsRef<[C64]>>(rows: &[R]) -> Result<Self> {
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        if let Some(bad) = rows.iter().find(|r| r.as_ref().len() != ncols) {
            return Err(Error::DimensionMismatch {
                op: "Matrix::from_rows",
                expected: format!("{ncols} columns"),
                found: format!("{} columns", bad.as_ref().len()),
            });
        }
        Ok(Self::from_fn(rows.len(), ncols, |i, j| rows[i].as_ref()[j]))
    }

    pub fn from_real_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let complex: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.as_ref().iter().map(|&v| C64::new(v, 0.0)).collect())
            .collect();
        Self::from_rows(&complex)
    }

    pub fn from_columns(columns: &[Vec<C64>]) -> Result<Self> {
        let nrows = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(nrows * columns.len());
        for c in columns {
            if c.len() != nrows {
                return Err(Error::DimensionMismatch {
                    op: "Matrix::from_columns",
                    expected: format!("{nrows} rows"),
                    found: format!("{} rows", c.len()),
                });
            }
            data.extend_from_slice(c);
        }
        Ok(Self {
            rows: nrows,
            cols: columns.len(),
            data,
        })
    }

    pub fn diag(values: &[C64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let v: Vec<C64> = values.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::diag(&v)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn col(&self, j: usize) -> &[C64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [C64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn column_vec(&self, j: usize) -> Vec<C64> {
        self.col(j).to_vec()
    }

    /// Appends a column; `values` must have `rows` entries.
    pub fn push_col(&mut self, values: &[C64]) {
        assert_eq!(values.len(), self.rows, "column length");
        self.data.extend_from_slice(values);
        self.cols += 1;
    }

    pub fn set_col(&mut self, j: usize, values: &[C64]) {
        self.col_mut(j).copy_from_slice(values);
    }

    /// Copy of the columns in `range`.
    pub fn columns(&self, range: Range<usize>) -> Matrix {
        let data = self.data[range.start * self.rows..range.end * self.rows].to_vec();
        Matrix {
            rows: self.rows,
            cols: range.len(),
            data,
        }
    }

    /// Copy of a rectangular block.
    pub fn block(&self, rows: Range<usize>, cols: Range<usize>) -> Matrix {
        Matrix::from_fn(rows.len(), cols.len(), |i, j| {
            self[(rows.start + i, cols.start + j)]
        })
    }

    pub fn hcat(parts: &[&Matrix]) -> Result<Matrix> {
        let rows = parts.first().map_or(0, |m| m.rows);
        let mut data = Vec::new();
        let mut cols = 0;
        for m in parts {
            if m.rows != rows {
                return Err(shape_mismatch("Matrix::hcat", (rows, m.cols), m.shape()));
            }
            data.extend_from_slice(&m.data);
            cols += m.cols;
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn adjoint(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(shape_mismatch("Matrix::sub", self.shape(), other.shape()));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(shape_mismatch("Matrix::add", self.shape(), other.shape()));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(shape_mismatch(
                "Matrix::matmul",
                (self.cols, rhs.cols),
                rhs.shape(),
            ));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        gemm_into(&mut out.view_mut(), self.view(), false, rhs.view(), false, false, ONE);
        Ok(out)
    }

    /// `selfᴴ * rhs`.
    pub fn adjoint_matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.rows != rhs.rows {
            return Err(shape_mismatch(
                "Matrix::adjoint_matmul",
                (self.rows, rhs.cols),
                rhs.shape(),
            ));
        }
        let mut out = Matrix::zeros(self.cols, rhs.cols);
        gemm_into(&mut out.view_mut(), self.view(), true, rhs.view(), false, false, ONE);
        Ok(out)
    }

    /// `self * rhsᴴ`.
    pub fn matmul_adjoint(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.cols {
            return Err(shape_mismatch(
                "Matrix::matmul_adjoint",
                (rhs.rows, self.cols),
                rhs.shape(),
            ));
        }
        let mut out = Matrix::zeros(self.rows, rhs.rows);
        gemm_into(&mut out.view_mut(), self.view(), false, rhs.view(), true, false, ONE);
        Ok(out)
    }

    pub fn norm_fro(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn norm_max(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn is_upper_triangular(&self) -> bool {
        (0..self.cols).all(|j| ((j + 1)..self.rows).all(|i| self[(i, j)] == ZERO))
    }

    pub(crate) fn view(&self) -> View<'_> {
        View {
            data: &self.data,
            rows: self.rows,
            cols: self.cols,
            ld: self.rows,
        }
    }

    pub(crate) fn view_cols(&self, range: Range<usize>) -> View<'_> {
        View {
            data: &self.data[range.start * self.rows..range.end * self.rows],
            rows: self.rows,
            cols: range.len(),
            ld: self.rows,
        }
    }

    pub(crate) fn view_mut(&mut self) -> ViewMut<'_> {
        ViewMut {
            rows: self.rows,
            cols: self.cols,
            ld: self.rows,
            data: &mut self.data,
        }
    }

    pub(crate) fn view_cols_mut(&mut self, range: Range<usize>) -> ViewMut<'_> {
        let rows = self.rows;
        ViewMut {
            rows,
            cols: range.len(),
            ld: rows,
            data: &mut self.data[range.start * rows..range.end * rows],
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(12) {
            write!(f, "  ")?;
            for j in 0..self.cols.min(8) {
                let v = self[(i, j)];
                write!(f, "{:>10.3e}{:+.3e}i ", v.re, v.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Borrowed column-major block with leading dimension `ld`.
#[derive(Clone, Copy)]
pub(crate) struct View<'a> {
    pub data: &'a [C64],
    pub rows: usize,
    pub cols: usize,
    pub ld: usize,
}

pub(crate) struct ViewMut<'a> {
    pub data: &'a mut [C64],
    pub rows: usize,
    pub cols: usize,
    pub ld: usize,
}

impl View<'_> {
    fn op_shape(&self, adj: bool) -> (usize, usize) {
        if adj {
            (self.cols, self.rows)
        } else {
            (self.rows, self.cols)
        }
    }

    /// Column stride, row stride of `op(self)`.
    fn op_strides(&self, adj: bool) -> (isize, isize) {
        if adj {
            (1, self.ld as isize)
        } else {
            (self.ld as isize, 1)
        }
    }
}

/// `dst <- [dst +] alpha * op(a) * op(b)`, where `op` is identity or the
/// conjugate transpose.
pub(crate) fn gemm_into(
    dst: &mut ViewMut<'_>,
    a: View<'_>,
    a_adj: bool,
    b: View<'_>,
    b_adj: bool,
    accumulate: bool,
    alpha: C64,
) {
    let (m, k) = a.op_shape(a_adj);
    let (k2, n) = b.op_shape(b_adj);
    assert_eq!(k, k2, "inner dimensions");
    assert_eq!((dst.rows, dst.cols), (m, n), "destination shape");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if !accumulate {
            for j in 0..n {
                dst.data[j * dst.ld..j * dst.ld + m].fill(ZERO);
            }
        }
        return;
    }
    let (a_cs, a_rs) = a.op_strides(a_adj);
    let (b_cs, b_rs) = b.op_strides(b_adj);
    // SAFETY: every view was built from a slice that covers
    // (cols - 1) * ld + rows elements, so all strided accesses stay in bounds;
    // dst does not alias a or b because it is a unique borrow.
    unsafe {
        gemm::gemm(
            m,
            n,
            k,
            dst.data.as_mut_ptr(),
            dst.ld as isize,
            1,
            accumulate,
            a.data.as_ptr(),
            a_cs,
            a_rs,
            b.data.as_ptr(),
            b_cs,
            b_rs,
            ONE,
            alpha,
            false,
            a_adj,
            b_adj,
            gemm::Parallelism::None,
        );
    }
}

/// `xᴴ y`.
#[inline]
pub(crate) fn dot(x: &[C64], y: &[C64]) -> C64 {
    debug_assert_eq!(x.len(), y.len());
    let mut re = 0.0;
    let mut im = 0.0;
    for (a, b) in x.iter().zip(y) {
        re += a.re * b.re + a.im * b.im;
        im += a.re * b.im - a.im * b.re;
    }
    C64::new(re, im)
}

/// `y <- y + a x`.
#[inline]
pub(crate) fn axpy(a: C64, x: &[C64], y: &mut [C64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub(crate) fn norm2(x: &[C64]) -> f64 {
    // Scaled accumulation to avoid overflow/underflow on extreme inputs.
    let amax = x.iter().map(|v| v.re.abs().max(v.im.abs())).fold(0.0, f64::max);
    if amax == 0.0 || !amax.is_finite() {
        return amax;
    }
    let s: f64 = x
        .iter()
        .map(|v| {
            let (a, b) = (v.re / amax, v.im / amax);
            a * a + b * b
        })
        .sum();
    amax * s.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn products_match_naive_loops() {
        let a = Matrix::from_fn(4, 3, |i, j| c(i as f64 + 1.0, j as f64 - 0.5));
        let b = Matrix::from_fn(3, 2, |i, j| c((i * j) as f64, 1.0 - i as f64));
        let ab = a.matmul(&b).unwrap();
        for i in 0..4 {
            for j in 0..2 {
                let want: C64 = (0..3).map(|l| a[(i, l)] * b[(l, j)]).sum();
                assert!((ab[(i, j)] - want).norm() < 1e-13);
            }
        }
        let aha = a.adjoint_matmul(&a).unwrap();
        let want = a.adjoint().matmul(&a).unwrap();
        assert!(aha.sub(&want).unwrap().norm_max() < 1e-13);
        let aah = a.matmul_adjoint(&a).unwrap();
        let want = a.matmul(&a.adjoint()).unwrap();
        assert!(aah.sub(&want).unwrap().norm_max() < 1e-13);
    }

    #[test]
    fn empty_inner_dimension_gives_zeros() {
        let a = Matrix::zeros(3, 0);
        let b = Matrix::zeros(0, 2);
        assert_eq!(a.matmul(&b).unwrap(), Matrix::zeros(3, 2));
    }

    #[test]
    fn shape_errors() {
        let a = Matrix::zeros(3, 2);
        assert!(matches!(
            a.matmul(&a),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(Matrix::from_col_major(2, 2, vec![ZERO; 3]).is_err());
        assert!(Matrix::from_real_rows(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    }

    #[test]
    fn norm2_survives_tiny_and_huge_entries() {
        assert_eq!(norm2(&[c(3e-300, 0.0), c(0.0, 4e-300)]), 5e-300);
        assert_eq!(norm2(&[c(3e300, 0.0), c(0.0, 4e300)]), 5e300);
    }

    #[test]
    fn eye_and_columns() {
        let e = Matrix::eye(4, 2);
        assert_eq!(e.shape(), (4, 2));
        assert_eq!(e[(1, 1)], ONE);
        assert_eq!(e.columns(1..2).col(0), &[ZERO, ONE, ZERO, ZERO]);
        assert!(Matrix::identity(3).is_upper_triangular());
    }
}
