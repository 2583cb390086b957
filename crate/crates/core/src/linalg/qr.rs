use super::{dot, DenseMatrix};
use crate::error::{Error, Result};

/// Thin QR factorization `A = Q·R` with `Q` n×p orthonormal and `R` p×p upper
/// triangular with a nonnegative diagonal.
#[derive(Debug, Clone)]
pub struct ThinQr {
    pub q: DenseMatrix,
    pub r: DenseMatrix,
}

/// Householder thin QR for `n ≥ p`. The sign of each column of `Q` is chosen
/// so that `R` has a nonnegative diagonal, which makes the factorization
/// unique for full-rank input.
pub fn thin_qr(a: &DenseMatrix) -> Result<ThinQr> {
    let (n, p) = a.shape();
    if n < p {
        return Err(Error::Dimension(format!(
            "thin QR needs rows >= cols, got {n}x{p}"
        )));
    }
    // Work column-major: column j of A is cols[j].
    let mut cols: Vec<Vec<f64>> = (0..p).map(|j| a.column(j)).collect();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut r = DenseMatrix::zeros(p, p);

    for k in 0..p {
        let x = &cols[k][k..];
        let norm = dot(x, x).sqrt();
        let mut v = x.to_vec();
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm = dot(&v, &v).sqrt();
        if vnorm > 0.0 && norm > 0.0 {
            v.iter_mut().for_each(|t| *t /= vnorm);
        } else {
            v.iter_mut().for_each(|t| *t = 0.0);
        }
        for col in cols.iter_mut().skip(k) {
            let tail = &mut col[k..];
            let s = 2.0 * dot(&v, tail);
            for (t, vi) in tail.iter_mut().zip(&v) {
                *t -= s * vi;
            }
        }
        for j in k..p {
            r[(k, j)] = cols[j][k];
        }
        reflectors.push(v);
    }

    // Q = H_0 H_1 … H_{p−1} applied to the first p columns of I.
    let mut q_cols: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    for (k, v) in reflectors.iter().enumerate().rev() {
        for col in q_cols.iter_mut() {
            let tail = &mut col[k..];
            let s = 2.0 * dot(v, tail);
            if s != 0.0 {
                for (t, vi) in tail.iter_mut().zip(v) {
                    *t -= s * vi;
                }
            }
        }
    }

    let mut q = DenseMatrix::zeros(n, p);
    for (j, col) in q_cols.iter().enumerate() {
        let flip = r[(j, j)] < 0.0;
        for i in 0..n {
            q[(i, j)] = if flip { -col[i] } else { col[i] };
        }
        if flip {
            for c in j..p {
                r[(j, c)] = -r[(j, c)];
            }
        }
    }
    Ok(ThinQr { q, r })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reconstructs_with_positive_diagonal() {
        let a = DenseMatrix::from_rows(&[
            &[1.0, 2.0, -1.0],
            &[0.5, -3.0, 2.0],
            &[2.0, 0.0, 1.0],
            &[-1.0, 1.0, 4.0],
        ]);
        let ThinQr { q, r } = thin_qr(&a).unwrap();
        assert!(q.orthonormality_residual() < 1e-14);
        let back = q.matmul(&r).unwrap();
        assert!(back.sub(&a).unwrap().max_abs() < 1e-13);
        for j in 0..3 {
            assert!(r[(j, j)] >= 0.0);
            for i in (j + 1)..3 {
                assert_eq!(r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn orthonormal_input_is_fixed_point() {
        let a = DenseMatrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0], &[0.0, 0.0]]);
        let ThinQr { q, .. } = thin_qr(&a).unwrap();
        assert!(q.sub(&a).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn wide_input_is_rejected() {
        assert!(thin_qr(&DenseMatrix::zeros(2, 3)).is_err());
    }
}
