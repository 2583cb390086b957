use super::{axpy, dot, sym_eig, DenseMatrix, SymMatrix};
use crate::error::{Error, Result};

/// Singular values below this fraction of the largest are treated as zero.
const RANK_TOL: f64 = 1e-12;

/// Thin SVD `A = U0·diag(sigma0)·V0ᵀ` of an n×p matrix with `n ≥ p`.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u0: DenseMatrix,
    pub sigma0: Vec<f64>,
    pub v0: DenseMatrix,
    /// Number of singular values above the rank tolerance.
    pub rank: usize,
}

impl ThinSvd {
    pub fn reconstruct(&self) -> DenseMatrix {
        let (n, p) = self.u0.shape();
        let mut us = self.u0.clone();
        for i in 0..n {
            for j in 0..p {
                us[(i, j)] *= self.sigma0[j];
            }
        }
        us.matmul(&self.v0.transpose()).expect("shapes agree")
    }

    /// The orthogonal polar factor `U0·V0ᵀ`.
    pub fn polar_factor(&self) -> DenseMatrix {
        self.u0.matmul(&self.v0.transpose()).expect("shapes agree")
    }
}

/// Thin SVD from the eigendecomposition of `AᵀA`.
///
/// Left vectors for singular values below `1e-12·σ_max` cannot be recovered
/// from `A·v/σ`; those columns are filled by Gram–Schmidt over the columns
/// of `I_n` in index order, taking the first candidates that are clearly
/// outside the current span.
pub fn thin_svd(a: &DenseMatrix) -> Result<ThinSvd> {
    let (n, p) = a.shape();
    if n < p {
        return Err(Error::Dimension(format!(
            "thin SVD needs rows >= cols, got {n}x{p}"
        )));
    }
    let gram = SymMatrix::from_dense(&a.t_matmul(a)?)?;
    let eig = sym_eig(&gram)?;
    // σ_j = ‖A·v_j‖ is accurate to ε‖A‖, whereas √λ_j of AᵀA only resolves
    // singular values down to about √ε·σ_max.
    let av = a.matmul(&eig.vectors)?;
    let mut cols: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..p)
        .map(|j| {
            let left = av.column(j);
            (dot(&left, &left).sqrt(), left, eig.vectors.column(j))
        })
        .collect();
    cols.sort_by(|x, y| y.0.total_cmp(&x.0));
    let sigma0: Vec<f64> = cols.iter().map(|c| c.0).collect();
    let mut v0 = DenseMatrix::zeros(p, p);
    for (j, c) in cols.iter().enumerate() {
        v0.set_column(j, &c.2);
    }
    let sigma_max = sigma0.first().copied().unwrap_or(0.0);
    let cutoff = RANK_TOL * sigma_max;

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(p);
    for (sigma, left, _) in cols.iter() {
        if !(*sigma > cutoff && *sigma > 0.0) {
            break;
        }
        let mut col: Vec<f64> = left.iter().map(|v| v / sigma).collect();
        // Two passes of Gram–Schmidt restore orthonormality lost to the
        // squared conditioning of AᵀA.
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &col);
                axpy(-c, b, &mut col);
            }
        }
        let norm = dot(&col, &col).sqrt();
        if norm < 0.5 {
            break;
        }
        col.iter_mut().for_each(|v| *v /= norm);
        basis.push(col);
    }
    let rank = basis.len();
    complete_basis(n, p, &mut basis);

    let mut u0 = DenseMatrix::zeros(n, p);
    for (j, col) in basis.iter().enumerate() {
        u0.set_column(j, col);
    }
    Ok(ThinSvd {
        u0,
        sigma0,
        v0,
        rank,
    })
}

/// Extends an orthonormal family in `R^n` to `target` vectors using unit
/// coordinate vectors in index order.
pub(crate) fn complete_basis(n: usize, target: usize, basis: &mut Vec<Vec<f64>>) {
    let accept = 0.5 / (n as f64).sqrt();
    let mut candidate = 0;
    while basis.len() < target && candidate < n {
        let mut col = vec![0.0; n];
        col[candidate] = 1.0;
        candidate += 1;
        for _ in 0..2 {
            for b in basis.iter() {
                let c = dot(b, &col);
                axpy(-c, b, &mut col);
            }
        }
        let norm = dot(&col, &col).sqrt();
        if norm > accept {
            col.iter_mut().for_each(|v| *v /= norm);
            basis.push(col);
        }
    }
    debug_assert_eq!(basis.len(), target, "coordinate vectors span R^n");
}
