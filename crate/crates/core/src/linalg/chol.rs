use super::{dot, SymMatrix};
use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor `S = L·Lᵀ`, row-major.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors a positive-definite matrix; fails on a non-positive pivot.
    pub fn factor(s: &SymMatrix) -> Result<Self> {
        Self::factor_slice(s.order(), s.as_slice())
    }

    /// Factors a row-major symmetric matrix given as a raw slice (only the
    /// lower triangle is read).
    pub fn factor_slice(n: usize, a: &[f64]) -> Result<Self> {
        debug_assert_eq!(a.len(), n * n);
        let mut l = vec![0.0; n * n];
        // Rows are produced in panels of four so that each finished row `j`
        // is streamed once per panel instead of once per row.
        let mut i0 = 0;
        while i0 < n {
            let rows = (n - i0).min(4);
            let (done, panel) = l.split_at_mut(i0 * n);
            for j in 0..i0 {
                let lj = &done[j * n..j * n + j];
                let ljj = done[j * n + j];
                let mut s = [0.0f64; 4];
                for (r, sr) in s.iter_mut().enumerate().take(rows) {
                    *sr = dot(&panel[r * n..r * n + j], lj);
                }
                for (r, sr) in s.iter().enumerate().take(rows) {
                    panel[r * n + j] = (a[(i0 + r) * n + j] - sr) / ljj;
                }
            }
            for r in 0..rows {
                let i = i0 + r;
                for j in i0..=i {
                    let (above, rest) = panel.split_at_mut(r * n);
                    let row_i = &mut rest[..n];
                    let s = if j == i {
                        dot(&row_i[..j], &row_i[..j])
                    } else {
                        let rj = (j - i0) * n;
                        dot(&row_i[..j], &above[rj..rj + j])
                    };
                    let v = a[i * n + j] - s;
                    if j == i {
                        if !(v > 0.0) || !v.is_finite() {
                            return Err(Error::Numerical(format!(
                                "matrix is not positive definite (pivot {i} = {v:.3e})"
                            )));
                        }
                        row_i[i] = v.sqrt();
                    } else {
                        row_i[j] = v / above[(j - i0) * n + j];
                    }
                }
            }
            i0 += rows;
        }
        Ok(Self { n, l })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn l(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.n + j]
    }

    /// Solves `L·y = b` in place.
    pub fn forward_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let s = dot(&self.l[i * n..i * n + i], &b[..i]);
            b[i] = (b[i] - s) / self.l[i * n + i];
        }
    }

    /// Solves `Lᵀ·x = y` in place.
    pub fn backward_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            b[i] /= self.l[i * n + i];
            let bi = b[i];
            let row = &self.l[i * n..i * n + i];
            for (bk, lk) in b[..i].iter_mut().zip(row) {
                *bk -= lk * bi;
            }
        }
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        self.forward_in_place(b);
        self.backward_in_place(b);
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// `L⁻¹` as a dense lower-triangular row-major matrix.
    pub fn l_inverse(&self) -> Vec<f64> {
        let n = self.n;
        let mut inv = vec![0.0; n * n];
        // Column j of L⁻¹ solves L·x = e_j; entries above j are zero.
        let mut col = vec![0.0; n];
        for j in 0..n {
            col.iter_mut().for_each(|v| *v = 0.0);
            col[j] = 1.0;
            for i in j..n {
                let row = &self.l[i * n..i * n + i];
                let s = dot(&row[j..i], &col[j..i]);
                col[i] = (col[i] - s) / self.l[i * n + i];
            }
            for i in j..n {
                inv[i * n + j] = col[i];
            }
        }
        inv
    }

    /// `S⁻¹ = L⁻ᵀ·L⁻¹`.
    pub fn inverse(&self) -> SymMatrix {
        let n = self.n;
        let linv = self.l_inverse();
        // Work with rows of L⁻ᵀ: row i of L⁻ᵀ is column i of L⁻¹, so transpose
        // once and take dot products of contiguous rows.
        let mut t = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                t[j * n + i] = linv[i * n + j];
            }
        }
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                // (L⁻ᵀL⁻¹)_{ij} = Σ_k L⁻¹_{ki} L⁻¹_{kj}, k ≥ max(i, j) = i.
                let v = dot(&t[i * n + i..(i + 1) * n], &t[j * n + i..(j + 1) * n]);
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        SymMatrix::from_row_major_unchecked(n, out)
    }

    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|i| 2.0 * self.l[i * self.n + i].ln()).sum()
    }
}
