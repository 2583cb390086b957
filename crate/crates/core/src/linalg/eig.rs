//! Symmetric eigendecomposition: Householder tridiagonalization followed by
//! implicit QL iterations with Wilkinson-style shifts.
//!
//! The working matrix is kept transposed relative to the textbook column
//! layout so that every inner loop walks contiguous memory.

use super::{DenseMatrix, SymMatrix};
use crate::error::{Error, Result};

const MAX_QL_SWEEPS: usize = 60;

/// Eigenvalues in descending order with matching orthonormal eigenvectors
/// stored as the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

impl SymEig {
    /// `Q·diag(f(λ))·Qᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.values.len();
        let weights: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        let rows = self.vectors.transpose();
        spectral_sum(n, &rows, &weights)
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.reconstruct_with(|v| v)
    }
}

/// Full decomposition `S = QΛQᵀ`.
pub fn sym_eig(s: &SymMatrix) -> Result<SymEig> {
    let (values, rows) = eig_rows(s, true)?;
    let rows = rows.expect("vectors requested");
    Ok(SymEig {
        values,
        vectors: rows.transpose(),
    })
}

/// Eigenvalues only, in descending order.
pub fn sym_eigvals(s: &SymMatrix) -> Result<Vec<f64>> {
    Ok(eig_rows(s, false)?.0)
}

/// Eigenvalues (descending) with eigenvectors as the *rows* of the returned
/// matrix. Used by the cone projections, which consume rows directly.
pub(crate) fn eig_rows(
    s: &SymMatrix,
    want_vectors: bool,
) -> Result<(Vec<f64>, Option<DenseMatrix>)> {
    let n = s.order();
    if let Some(pos) = s.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite entry at ({}, {}) in eigendecomposition input",
            pos / n,
            pos % n
        )));
    }
    if n == 0 {
        return Ok((Vec::new(), want_vectors.then(|| DenseMatrix::zeros(0, 0))));
    }
    let mut w = s.as_slice().to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(n, &mut w, &mut d, &mut e, want_vectors);
    ql_implicit(n, &mut d, &mut e, want_vectors.then_some(&mut w[..]))?;

    // Descending order.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let vectors = want_vectors.then(|| {
        let mut out = DenseMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            out.row_mut(dst).copy_from_slice(&w[src * n..(src + 1) * n]);
        }
        out
    });
    Ok((values, vectors))
}

/// `Σ_k weights[k]·q_k q_kᵀ` where `q_k` is row `k` of `rows`.
pub(crate) fn spectral_sum(n: usize, rows: &DenseMatrix, weights: &[f64]) -> SymMatrix {
    let mut out = vec![0.0; n * n];
    for (k, &wk) in weights.iter().enumerate() {
        if wk == 0.0 {
            continue;
        }
        let q = rows.row(k);
        for i in 0..n {
            let a = wk * q[i];
            if a == 0.0 {
                continue;
            }
            let dst = &mut out[i * n..i * n + i + 1];
            for (dj, qj) in dst.iter_mut().zip(&q[..=i]) {
                *dj += a * qj;
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            out[j * n + i] = out[i * n + j];
        }
    }
    SymMatrix::from_row_major_unchecked(n, out)
}

/// Householder reduction to tridiagonal form. On exit `d` is the diagonal,
/// `e[1..]` the subdiagonal, and (if requested) row `k` of `w` holds the
/// k-th column of the accumulated orthogonal transform.
fn tridiagonalize(n: usize, w: &mut [f64], d: &mut [f64], e: &mut [f64], accumulate: bool) {
    let at = |r: usize, c: usize| r * n + c;
    for j in 0..n {
        d[j] = w[at(j, n - 1)];
    }
    for i in (1..n).rev() {
        let scale: f64 = d[..i].iter().map(|v| v.abs()).sum();
        let mut h = 0.0;
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = w[at(j, i - 1)];
                w[at(j, i)] = 0.0;
                w[at(i, j)] = 0.0;
            }
        } else {
            for dk in d[..i].iter_mut() {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            e[..i].iter_mut().for_each(|v| *v = 0.0);

            for j in 0..i {
                f = d[j];
                w[at(i, j)] = f;
                g = e[j] + w[at(j, j)] * f;
                let row = &w[at(j, 0)..at(j, 0) + i];
                for k in (j + 1)..i {
                    g += row[k] * d[k];
                    e[k] += row[k] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let fj = d[j];
                let gj = e[j];
                let row = &mut w[at(j, 0)..at(j, 0) + i];
                for k in j..i {
                    row[k] -= fj * e[k] + gj * d[k];
                }
                d[j] = w[at(j, i - 1)];
                w[at(j, i)] = 0.0;
            }
        }
        d[i] = h;
    }

    if !accumulate {
        for i in 0..n {
            d[i] = w[at(i, i)];
        }
        e[0] = 0.0;
        return;
    }

    for i in 0..n - 1 {
        w[at(i, n - 1)] = w[at(i, i)];
        w[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = w[at(i + 1, k)] / h;
            }
            for j in 0..=i {
                let (head, tail) = w.split_at_mut(at(i + 1, 0));
                let v = &tail[..=i];
                let row = &mut head[at(j, 0)..at(j, 0) + i + 1];
                let g: f64 = super::dot(v, row);
                for k in 0..=i {
                    row[k] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            w[at(i + 1, k)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = w[at(j, n - 1)];
        w[at(j, n - 1)] = 0.0;
    }
    w[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL on the tridiagonal (d, e). Rotations are applied to the rows
/// of `w` when present.
fn ql_implicit(n: usize, d: &mut [f64], e: &mut [f64], mut w: Option<&mut [f64]>) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > MAX_QL_SWEEPS {
                    return Err(Error::Numerical(format!(
                        "QL iteration did not converge for eigenvalue {l} of {n} \
                         (|e| = {:.3e}, tolerance {:.3e})",
                        e[l].abs(),
                        eps * tst1
                    )));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d[l + 2..n].iter_mut() {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(w) = w.as_deref_mut() {
                        let (lo, hi) = w.split_at_mut((i + 1) * n);
                        let row_i = &mut lo[i * n..];
                        let row_i1 = &mut hi[..n];
                        for (a, b) in row_i.iter_mut().zip(row_i1.iter_mut()) {
                            let hk = *b;
                            *b = s * *a + c * hk;
                            *a = c * *a - s * hk;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}
