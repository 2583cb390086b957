//! Dense real linear algebra for desk-scale problems.
//!
//! Everything here is row-major `f64` storage with no external BLAS. The
//! kernels are sized for matrices up to a few hundred rows, which covers the
//! largest Kronecker blocks produced by the relaxations.

mod chol;
mod eig;
mod qr;
mod svd;
mod svec;

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

pub use chol::Cholesky;
pub use eig::{sym_eig, sym_eigvals, SymEig};
pub use qr::{thin_qr, ThinQr};
pub use svd::{thin_svd, ThinSvd};
pub use svec::{smat, svec, svec_len, svec_order, SvecVector};

pub(crate) use eig::{eig_rows, spectral_sum};
pub(crate) use svec::svec_index;

/// Dense row-major real matrix.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
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
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting wrong lengths and
    /// non-finite values.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!(
                "non-finite entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Convenience constructor for literals; panics on ragged input.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
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

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        debug_assert_eq!(values.len(), self.rows);
        for (i, v) in values.iter().enumerate() {
            self[(i, j)] = *v;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// `self · other`.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        gemm_acc(
            self.rows,
            self.cols,
            other.cols,
            &self.data,
            &other.data,
            &mut out.data,
        );
        Ok(out)
    }

    /// `selfᵀ · other`.
    pub fn t_matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply ({}x{})ᵀ by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = other.row(k);
            for (i, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                axpy(a, b_row, out.row_mut(i));
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Dimension(format!(
                "vector of length {} for a {}x{} matrix",
                x.len(),
                self.rows,
                self.cols
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * alpha).collect(),
        }
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &DenseMatrix, f: impl Fn(f64, f64) -> f64) -> Result<DenseMatrix> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension(format!(
                "shape {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    /// Largest absolute entry (0 for an empty matrix).
    pub fn max_abs(&self) -> f64 {
        max_abs(&self.data)
    }

    pub fn frobenius_sq(&self) -> f64 {
        dot(&self.data, &self.data)
    }

    pub fn frobenius(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    /// `‖selfᵀ·self − I‖_max`, the Stiefel feasibility residual.
    pub fn orthonormality_residual(&self) -> f64 {
        let gram = self.t_matmul(self).expect("shapes agree");
        let mut worst = 0.0f64;
        for i in 0..gram.rows {
            for j in 0..gram.cols {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// Symmetric matrix with full dense storage.
///
/// Symmetry is exact: constructors average the two triangles and mutation
/// goes through [`SymMatrix::set`], which writes both.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    order: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(order: usize) -> Self {
        Self {
            order,
            data: vec![0.0; order * order],
        }
    }

    pub fn identity(order: usize) -> Self {
        let mut s = Self::zeros(order);
        for i in 0..order {
            s.data[i * order + i] = 1.0;
        }
        s
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut s = Self::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            s.data[i * diag.len() + i] = *d;
        }
        s
    }

    /// Symmetrizes a square matrix as `(A + Aᵀ)/2`.
    pub fn from_dense(a: &DenseMatrix) -> Result<Self> {
        if a.rows != a.cols {
            return Err(Error::Dimension(format!(
                "symmetric matrix needs a square input, got {}x{}",
                a.rows, a.cols
            )));
        }
        if a.rows == 0 {
            return Err(Error::Dimension("symmetric matrix of order 0".into()));
        }
        let n = a.rows;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = a.data[i * n + i];
            for j in (i + 1)..n {
                let v = 0.5 * (a.data[i * n + j] + a.data[j * n + i]);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Ok(Self { order: n, data })
    }

    /// Builds from row-major full storage, averaging the triangles.
    pub fn from_row_major(order: usize, data: Vec<f64>) -> Result<Self> {
        Self::from_dense(&DenseMatrix::from_row_major(order, order, data)?)
    }

    /// Builds from an upper-triangle generator `f(i, j)` with `i <= j`.
    pub fn from_upper_fn(order: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut s = Self::zeros(order);
        for i in 0..order {
            for j in i..order {
                s.set(i, j, f(i, j));
            }
        }
        s
    }

    pub(crate) fn from_row_major_unchecked(order: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), order * order);
        Self { order, data }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.order..(i + 1) * self.order]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.order + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.order + j] = v;
        self.data[j * self.order + i] = v;
    }

    /// Adds `v` to entry (i,j) and, off the diagonal, to (j,i).
    #[inline]
    pub fn add_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.order + j] += v;
        if i != j {
            self.data[j * self.order + i] += v;
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix {
            rows: self.order,
            cols: self.order,
            data: self.data.clone(),
        }
    }

    pub fn into_dense(self) -> DenseMatrix {
        DenseMatrix {
            rows: self.order,
            cols: self.order,
            data: self.data,
        }
    }

    /// Frobenius inner product `S • T = tr(ST)`.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        debug_assert_eq!(self.order, other.order);
        dot(&self.data, &other.data)
    }

    pub fn trace(&self) -> f64 {
        (0..self.order).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.data)
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self {
            order: self.order,
            data: self.data.iter().map(|v| v * alpha).collect(),
        }
    }

    pub fn add_scaled(&mut self, alpha: f64, other: &SymMatrix) {
        debug_assert_eq!(self.order, other.order);
        axpy(alpha, &other.data, &mut self.data);
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.order).map(|i| dot(self.row(i), x)).collect()
    }

    /// Principal submatrix on rows/cols `start..start+len`.
    pub fn block(&self, row_start: usize, col_start: usize, len: usize) -> DenseMatrix {
        DenseMatrix::from_fn(len, len, |i, j| self.get(row_start + i, col_start + j))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let vals = sym_eigvals(self)?;
        Ok(vals.last().copied().unwrap_or(0.0))
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "SymMatrix order {} [", self.order)?;
        for i in 0..self.order {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// Column-stacking vectorization: `result[j*n + i] = U(i, j)`.
pub fn vec(u: &DenseMatrix) -> Vec<f64> {
    let (n, p) = u.shape();
    let mut out = Vec::with_capacity(n * p);
    for j in 0..p {
        for i in 0..n {
            out.push(u[(i, j)]);
        }
    }
    out
}

/// Inverse of [`vec`].
pub fn mat(u: &[f64], n: usize, p: usize) -> Result<DenseMatrix> {
    if u.len() != n * p {
        return Err(Error::Dimension(format!(
            "vector of length {} cannot be reshaped to {n}x{p}",
            u.len()
        )));
    }
    Ok(DenseMatrix::from_fn(n, p, |i, j| u[j * n + i]))
}

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = DenseMatrix::zeros(ra * rb, ca * cb);
    for i in 0..ra {
        for j in 0..ca {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            for k in 0..rb {
                let dst = (i * rb + k) * (ca * cb) + j * cb;
                let src = b.row(k);
                for (d, s) in out.data[dst..dst + cb].iter_mut().zip(src) {
                    *d = aij * s;
                }
            }
        }
    }
    out
}

/// Dot product with split accumulators so the loop vectorizes.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let chunks = n / 8;
    for c in 0..chunks {
        let aa = &a[c * 8..c * 8 + 8];
        let bb = &b[c * 8..c * 8 + 8];
        for k in 0..8 {
            acc[k] += aa[k] * bb[k];
        }
    }
    let mut tail = 0.0;
    for k in chunks * 8..n {
        tail += a[k] * b[k];
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `y += alpha·x`.
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// `C += A·B` for row-major `A` (m×k), `B` (k×n), `C` (m×n).
pub(crate) fn gemm_acc(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    for i in 0..m {
        let c_row = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            axpy(aip, &b[p * n..(p + 1) * n], c_row);
        }
    }
}

/// `S·T` for symmetric inputs, returned as a general matrix.
pub fn sym_matmul(s: &SymMatrix, t: &SymMatrix) -> DenseMatrix {
    let n = s.order;
    let mut out = DenseMatrix::zeros(n, n);
    gemm_acc(n, n, n, &s.data, &t.data, &mut out.data);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vec_stacks_columns() {
        let u = DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        assert_eq!(vec(&u), vec![1.0, 3.0, 5.0, 2.0, 4.0, 6.0]);
        assert_eq!(vec(&DenseMatrix::identity(2)), vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn mat_inverts_vec() {
        let m = mat(&[1.0, 3.0, 5.0, 2.0, 4.0, 6.0], 3, 2).unwrap();
        assert_eq!(
            m,
            DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]])
        );
        assert_eq!(mat(&[0.0; 6], 2, 3).unwrap(), DenseMatrix::zeros(2, 3));
        assert!(matches!(mat(&[1.0; 5], 3, 2), Err(Error::Dimension(_))));
    }

    #[test]
    fn kron_shapes_and_identity() {
        let i6 = kron(&DenseMatrix::identity(2), &DenseMatrix::identity(3));
        assert_eq!(i6, DenseMatrix::identity(6));
        let k = kron(&DenseMatrix::zeros(2, 3), &DenseMatrix::zeros(4, 5));
        assert_eq!(k.shape(), (8, 15));
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = DenseMatrix::from_rows(&[&[0.0, 5.0], &[6.0, 7.0]]);
        let k = kron(&a, &b);
        assert_eq!(k[(0, 1)], 5.0);
        assert_eq!(k[(1, 2)], 12.0);
        assert_eq!(k[(3, 3)], 28.0);
        assert_eq!(k[(2, 1)], 15.0);
    }

    #[test]
    fn from_dense_averages_triangles() {
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0], &[4.0, 5.0]]);
        let s = SymMatrix::from_dense(&a).unwrap();
        assert_eq!(s.get(0, 1), 3.0);
        assert_eq!(s.get(1, 0), 3.0);
        assert!(SymMatrix::from_dense(&DenseMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn rejects_non_finite_entries() {
        let err = DenseMatrix::from_row_major(1, 2, vec![1.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::Parameter(_)));
    }

    #[test]
    fn dot_matches_naive_sum() {
        let a: Vec<f64> = (0..37).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..37).map(|i| (i as f64 * 0.3).cos()).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }
}
