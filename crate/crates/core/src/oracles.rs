//! Exact solutions for the special cases that admit them: orthogonal
//! Procrustes with a square unknown and the trust-region subproblem (p = 1).

use crate::error::{Error, Result};
use crate::instances::{ProblemClass, QpsInstance};
use crate::linalg::{dot, sym_eig, thin_svd, DenseMatrix, SymMatrix};
use crate::round::StiefelPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    /// `U* = VWᵀ` from the SVD of `AᵀB`.
    ProcrustesSvd,
    /// Boundary root of the secular equation.
    Secular,
    /// Trust-region hard case: linear part orthogonal to the bottom
    /// eigenspace, completed with an eigenvector.
    HardCase,
}

impl OracleMethod {
    pub fn tag(self) -> &'static str {
        match self {
            OracleMethod::ProcrustesSvd => "procrustes-svd",
            OracleMethod::Secular => "trs-secular",
            OracleMethod::HardCase => "trs-hard-case",
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    /// Optimal value of `uᵀHu + 2gᵀu`.
    pub value: f64,
    pub minimizer: StiefelPoint,
    pub method: OracleMethod,
}

/// Global minimizer of `‖AU − B‖_F²` over square orthogonal `U`, with the
/// value reported in quadratic form, i.e. without the constant `‖B‖_F²`.
pub fn procrustes_closed_form(a: &DenseMatrix, b: &DenseMatrix) -> Result<OracleResult> {
    let (m, n) = a.shape();
    let (mb, p) = b.shape();
    if m != mb {
        return Err(Error::Dimension(format!("A has {m} rows but B has {mb}")));
    }
    if n != p {
        return Err(Error::Parameter(format!(
            "closed-form Procrustes needs a square unknown, got n={n}, p={p}"
        )));
    }
    let svd = thin_svd(&a.t_matmul(b)?)?;
    let u = svd.polar_factor();
    let value = a.frobenius_sq() - 2.0 * svd.sigma0.iter().sum::<f64>();
    Ok(OracleResult {
        value,
        minimizer: StiefelPoint::new(u)?,
        method: OracleMethod::ProcrustesSvd,
    })
}

/// Global minimizer of `uᵀHu + 2gᵀu` over the unit sphere.
pub fn trs_oracle(h: &SymMatrix, g: &[f64]) -> Result<OracleResult> {
    let n = h.order();
    if g.len() != n {
        return Err(Error::Dimension(format!(
            "g has length {}, H has order {n}",
            g.len()
        )));
    }
    if n == 0 {
        return Err(Error::Parameter("empty trust-region subproblem".into()));
    }
    // Ascending order, so that index 0 is λ_min.
    let eig = sym_eig(h)?;
    let lam: Vec<f64> = eig.values.iter().rev().copied().collect();
    let q = DenseMatrix::from_fn(n, n, |i, j| eig.vectors[(i, n - 1 - j)]);
    let lam = &lam;
    // Coordinates of g in the eigenbasis.
    let gh: Vec<f64> = (0..n).map(|i| dot(&q.column(i), g)).collect();
    let gnorm = dot(g, g).sqrt();
    let scale = lam.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let l1 = lam[0];
    let bottom: Vec<bool> = lam.iter().map(|&v| v - l1 <= 1e-12 * scale).collect();
    let g_bottom: f64 = (0..n)
        .filter(|&i| bottom[i])
        .map(|i| gh[i] * gh[i])
        .sum::<f64>()
        .sqrt();

    let (coords, method) = if g_bottom <= 1e-12 * gnorm.max(1.0) {
        // Candidate with the multiplier pinned at λ_min.
        let mut c: Vec<f64> = (0..n)
            .map(|i| {
                if bottom[i] {
                    0.0
                } else {
                    -gh[i] / (lam[i] - l1)
                }
            })
            .collect();
        let norm2: f64 = c.iter().map(|v| v * v).sum();
        if norm2 <= 1.0 {
            let first = bottom
                .iter()
                .position(|&b| b)
                .expect("λ_min is in its own eigenspace");
            c[first] = (1.0 - norm2).sqrt();
            (c, OracleMethod::HardCase)
        } else {
            (secular(lam, &gh, gnorm), OracleMethod::Secular)
        }
    } else {
        (secular(lam, &gh, gnorm), OracleMethod::Secular)
    };

    let mut u = q.matvec(&coords)?;
    let norm = dot(&u, &u).sqrt();
    u.iter_mut().for_each(|v| *v /= norm);
    let value = dot(&u, &h.matvec(&u)) + 2.0 * dot(g, &u);
    Ok(OracleResult {
        value,
        minimizer: StiefelPoint::new(DenseMatrix::from_row_major(n, 1, u)?)?,
        method,
    })
}

/// Solves `Σ ĝ_i²/(λ_i + μ − λ_1)² = 1` for `μ > 0` and returns the
/// eigen-coordinates `−ĝ_i/(λ_i + μ − λ_1)`.
fn secular(lam: &[f64], gh: &[f64], gnorm: f64) -> Vec<f64> {
    let l1 = lam[0];
    let norm_sq = |mu: f64| -> (f64, f64) {
        // ‖u(μ)‖² and its derivative in μ.
        let mut s = 0.0;
        let mut ds = 0.0;
        for (l, g) in lam.iter().zip(gh) {
            let d = l - l1 + mu;
            s += g * g / (d * d);
            ds -= 2.0 * g * g / (d * d * d);
        }
        (s, ds)
    };
    // ‖u(μ)‖ ≤ ‖g‖/μ, so μ = ‖g‖ is on the short side of the root.
    let mut lo = 0.0;
    let mut hi = gnorm;
    let mut mu = 0.5 * hi;
    for _ in 0..300 {
        let (s, ds) = norm_sq(mu);
        if !s.is_finite() || s > 1.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        // Newton on 1/‖u‖ − 1, which is nearly linear in μ.
        let r = s.sqrt();
        let f = 1.0 / r - 1.0;
        let df = -0.5 * ds / (s * r);
        let mut next = mu - f / df;
        if !(next > lo && next < hi && next.is_finite()) {
            next = 0.5 * (lo + hi);
        }
        if next == mu {
            break;
        }
        mu = next;
    }
    lam.iter()
        .zip(gh)
        .map(|(l, g)| -g / (l - l1 + mu))
        .collect()
}

/// The exact optimum of `inst` when one of the oracles applies: p = 1, or a
/// Procrustes instance with n = p.
pub fn oracle_for(inst: &QpsInstance) -> Option<Result<OracleResult>> {
    if inst.p() == 1 {
        return Some(trs_oracle(inst.h(), inst.g()));
    }
    if inst.class() == ProblemClass::Procrustes && inst.n() == inst.p() {
        let w = inst.aux()?;
        return Some(procrustes_closed_form(&w.a, &w.b));
    }
    None
}
