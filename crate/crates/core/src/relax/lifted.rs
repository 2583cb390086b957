use super::y_var;
use crate::error::{Error, Result};
use crate::linalg::{vec, DenseMatrix, SymMatrix};

/// `(u, X, Y)` with `Y = [[1, uᵀ], [u, X]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedPoint {
    n: usize,
    p: usize,
    u: Vec<f64>,
    x: SymMatrix,
    y: SymMatrix,
}

impl LiftedPoint {
    /// Rank-one lift `X = u uᵀ` of `u = vec(U)`.
    pub fn rank_one(u_mat: &DenseMatrix) -> Self {
        let (n, p) = u_mat.shape();
        let u = vec(u_mat);
        let y = SymMatrix::from_upper_fn(1 + n * p, |a, b| {
            let ya = if a == 0 { 1.0 } else { u[a - 1] };
            let yb = if b == 0 { 1.0 } else { u[b - 1] };
            ya * yb
        });
        Self::from_y(y, n, p).expect("consistent shapes")
    }

    /// Splits `Y` into its parts; `Y(0,0)` is kept as is.
    pub fn from_y(y: SymMatrix, n: usize, p: usize) -> Result<Self> {
        let np = n * p;
        if y.order() != 1 + np {
            return Err(Error::Dimension(format!(
                "Y has order {}, expected {}",
                y.order(),
                1 + np
            )));
        }
        let u = (0..np).map(|a| y.get(0, 1 + a)).collect();
        let x = SymMatrix::from_upper_fn(np, |a, b| y.get(1 + a, 1 + b));
        Ok(Self { n, p, u, x, y })
    }

    /// Assembles `Y` from `u` and a symmetric `X`.
    pub fn from_parts(u: Vec<f64>, x: SymMatrix, n: usize, p: usize) -> Result<Self> {
        let np = n * p;
        if u.len() != np || x.order() != np {
            return Err(Error::Dimension(format!(
                "need u of length {np} and X of order {np}, got {} and {}",
                u.len(),
                x.order()
            )));
        }
        let y = SymMatrix::from_upper_fn(1 + np, |a, b| match (a, b) {
            (0, 0) => 1.0,
            (0, b) => u[b - 1],
            (a, b) => x.get(a - 1, b - 1),
        });
        Ok(Self { n, p, u, x, y })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn x(&self) -> &SymMatrix {
        &self.x
    }

    pub fn y(&self) -> &SymMatrix {
        &self.y
    }

    /// The n×n block `X_jk` (0-based), so that `X_kj = X_jkᵀ`.
    pub fn x_block(&self, j: usize, k: usize) -> DenseMatrix {
        let n = self.n;
        DenseMatrix::from_fn(n, n, |i, l| self.x.get(j * n + i, k * n + l))
    }

    /// Variable vector of the relaxation programs.
    pub fn to_vars(&self) -> Vec<f64> {
        let order = self.y.order();
        let mut out = vec![0.0; order * (order + 1) / 2];
        for b in 0..order {
            for a in 0..=b {
                out[y_var(a, b)] = self.y.get(a, b);
            }
        }
        out
    }
}
