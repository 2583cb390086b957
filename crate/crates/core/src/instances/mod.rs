//! Problem instances `min uᵀHu + 2gᵀu` over `u = vec(U)`, `U ∈ St(n,p)`,
//! and generators for the four synthetic classes.

mod io;
pub mod rng;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{dot, kron, vec, DenseMatrix, SymMatrix};

pub use io::{load_instance, save_instance, SCHEMA_VERSION};
pub use rng::RngStream;

/// Feasibility tolerance accepted by [`QpsInstance::eval_objective`].
pub const FEASIBILITY_TOL: f64 = 1e-8;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum ProblemClass {
    Random,
    BlockDiag,
    Procrustes,
    Penrose,
}

impl ProblemClass {
    pub const ALL: [ProblemClass; 4] = [
        ProblemClass::Random,
        ProblemClass::BlockDiag,
        ProblemClass::Procrustes,
        ProblemClass::Penrose,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ProblemClass::Random => "random",
            ProblemClass::BlockDiag => "blockdiag",
            ProblemClass::Procrustes => "procrustes",
            ProblemClass::Penrose => "penrose",
        }
    }
}

impl fmt::Display for ProblemClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ProblemClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(ProblemClass::Random),
            "blockdiag" => Ok(ProblemClass::BlockDiag),
            "procrustes" => Ok(ProblemClass::Procrustes),
            "penrose" => Ok(ProblemClass::Penrose),
            other => Err(Error::Parameter(format!(
                "unknown problem class `{other}` (expected random, blockdiag, procrustes or penrose)"
            ))),
        }
    }
}

/// Data the Procrustes and Penrose generators sampled before forming H, g.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorWitness {
    pub m: usize,
    /// m×n.
    pub a: DenseMatrix,
    /// m×p for Procrustes, m×q for Penrose.
    pub b: DenseMatrix,
    /// p×q, Penrose only.
    pub c: Option<DenseMatrix>,
    pub q: Option<usize>,
}

impl GeneratorWitness {
    /// `‖B‖_F²`, the constant dropped when the regression objective is
    /// written in quadratic form.
    pub fn offset(&self) -> f64 {
        self.b.frobenius_sq()
    }

    /// `‖A·U·C − B‖_F²` (C = I for Procrustes), evaluated directly.
    pub fn residual_sq(&self, u: &DenseMatrix) -> Result<f64> {
        let au = self.a.matmul(u)?;
        let auc = match &self.c {
            Some(c) => au.matmul(c)?,
            None => au,
        };
        Ok(auc.sub(&self.b)?.frobenius_sq())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpsInstance {
    n: usize,
    p: usize,
    h: SymMatrix,
    g: Vec<f64>,
    class: ProblemClass,
    seed: u64,
    aux: Option<GeneratorWitness>,
}

impl QpsInstance {
    /// Validates dimensions and the structural invariants of `class`.
    pub fn new(
        n: usize,
        p: usize,
        h: SymMatrix,
        g: Vec<f64>,
        class: ProblemClass,
        seed: u64,
        aux: Option<GeneratorWitness>,
    ) -> Result<Self> {
        check_sizes(n, p)?;
        let np = n * p;
        if h.order() != np {
            return Err(Error::Validation(format!(
                "H has order {} but n·p = {np}",
                h.order()
            )));
        }
        if g.len() != np {
            return Err(Error::Validation(format!(
                "g has length {} but n·p = {np}",
                g.len()
            )));
        }
        if h.as_slice().iter().chain(&g).any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite entry in H or g".into()));
        }
        if class == ProblemClass::BlockDiag {
            if g.iter().any(|&v| v != 0.0) {
                return Err(Error::Validation("blockdiag instance with g ≠ 0".into()));
            }
            for r in 0..np {
                for c in 0..np {
                    if r / n != c / n && h.get(r, c) != 0.0 {
                        return Err(Error::Validation(format!(
                            "blockdiag instance has nonzero off-diagonal block entry at ({r}, {c})"
                        )));
                    }
                }
            }
        }
        if let Some(w) = &aux {
            if w.a.cols() != n || w.a.rows() != w.m || w.b.rows() != w.m {
                return Err(Error::Validation(
                    "generator witness has inconsistent shapes".into(),
                ));
            }
            let b_cols = match (&w.c, w.q) {
                (Some(c), Some(q)) => {
                    if c.shape() != (p, q) {
                        return Err(Error::Validation("witness C must be p×q".into()));
                    }
                    q
                }
                (None, None) => p,
                _ => {
                    return Err(Error::Validation(
                        "witness C and q must be given together".into(),
                    ))
                }
            };
            if w.b.cols() != b_cols {
                return Err(Error::Validation(
                    "witness B has the wrong column count".into(),
                ));
            }
        }
        Ok(Self {
            n,
            p,
            h,
            g,
            class,
            seed,
            aux,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn np(&self) -> usize {
        self.n * self.p
    }

    pub fn h(&self) -> &SymMatrix {
        &self.h
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn class(&self) -> ProblemClass {
        self.class
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn aux(&self) -> Option<&GeneratorWitness> {
        self.aux.as_ref()
    }

    /// `uᵀHu + 2gᵀu` for any vector of length np, without a feasibility check.
    pub fn quadratic_form(&self, u: &[f64]) -> f64 {
        let hu = self.h.matvec(u);
        dot(u, &hu) + 2.0 * dot(&self.g, u)
    }

    /// Objective at a Stiefel point; rejects points with
    /// `‖UᵀU − I‖_max > 1e-8`.
    pub fn eval_objective(&self, u: &DenseMatrix) -> Result<f64> {
        if u.shape() != (self.n, self.p) {
            return Err(Error::Dimension(format!(
                "point is {}x{}, instance expects {}x{}",
                u.rows(),
                u.cols(),
                self.n,
                self.p
            )));
        }
        let residual = u.orthonormality_residual();
        if !(residual <= FEASIBILITY_TOL) {
            return Err(Error::Infeasible { residual });
        }
        Ok(self.quadratic_form(&vec(u)))
    }

    /// Euclidean gradient `2(H·vec(U) + g)` reshaped to n×p.
    pub fn euclidean_gradient(&self, u: &DenseMatrix) -> DenseMatrix {
        let uv = vec(u);
        let hu = self.h.matvec(&uv);
        DenseMatrix::from_fn(self.n, self.p, |i, j| {
            let k = j * self.n + i;
            2.0 * (hu[k] + self.g[k])
        })
    }
}

fn check_sizes(n: usize, p: usize) -> Result<()> {
    if p == 0 || n == 0 {
        return Err(Error::Parameter(format!(
            "need 1 <= p <= n, got n={n}, p={p}"
        )));
    }
    if p > n {
        return Err(Error::Parameter(format!("need p <= n, got n={n}, p={p}")));
    }
    Ok(())
}

fn gaussian_matrix(rng: &mut RngStream, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.normal())
}

/// Symmetric matrix with i.i.d. N(0,1) upper triangle (diagonal included),
/// sampled row by row and mirrored.
fn gaussian_symmetric(rng: &mut RngStream, order: usize) -> SymMatrix {
    SymMatrix::from_upper_fn(order, |_, _| rng.normal())
}

fn regression_range(n: usize) -> (usize, usize) {
    (n.div_ceil(2), 2 * n)
}

/// Dense H and g with i.i.d. N(0,1) entries (H mirrored from its upper
/// triangle). Sampling order: H row by row, then g.
pub fn gen_random(n: usize, p: usize, seed: u64) -> Result<QpsInstance> {
    check_sizes(n, p)?;
    let class = ProblemClass::Random;
    let mut rng = RngStream::for_instance(class.tag(), n, p, seed);
    let h = gaussian_symmetric(&mut rng, n * p);
    let g = (0..n * p).map(|_| rng.normal()).collect();
    QpsInstance::new(n, p, h, g, class, seed, None)
}

/// `H = Diag(H_11, …, H_pp)` with independent Gaussian symmetric blocks and
/// `g = 0`.
pub fn gen_blockdiag(n: usize, p: usize, seed: u64) -> Result<QpsInstance> {
    check_sizes(n, p)?;
    let class = ProblemClass::BlockDiag;
    let mut rng = RngStream::for_instance(class.tag(), n, p, seed);
    let mut h = SymMatrix::zeros(n * p);
    for j in 0..p {
        let block = gaussian_symmetric(&mut rng, n);
        for r in 0..n {
            for c in r..n {
                h.set(j * n + r, j * n + c, block.get(r, c));
            }
        }
    }
    QpsInstance::new(n, p, h, vec![0.0; n * p], class, seed, None)
}

/// Orthogonal Procrustes `min ‖AU − B‖_F²`: m uniform on ⌈n/2⌉..=2n, then A
/// (m×n) and B (m×p) Gaussian; `H = I_p ⊗ AᵀA`, `g = vec(−AᵀB)`.
pub fn gen_procrustes(n: usize, p: usize, seed: u64) -> Result<QpsInstance> {
    check_sizes(n, p)?;
    let class = ProblemClass::Procrustes;
    let mut rng = RngStream::for_instance(class.tag(), n, p, seed);
    let (lo, hi) = regression_range(n);
    let m = rng.uniform_inclusive(lo, hi);
    let a = gaussian_matrix(&mut rng, m, n);
    let b = gaussian_matrix(&mut rng, m, p);
    let (h, g) = regression_data(&a, &b, &DenseMatrix::identity(p))?;
    let aux = GeneratorWitness {
        m,
        a,
        b,
        c: None,
        q: None,
    };
    QpsInstance::new(n, p, h, g, class, seed, Some(aux))
}

/// Penrose regression `min ‖AUC − B‖_F²`: m, q uniform on ⌈n/2⌉..=2n, then
/// A (m×n), B (m×q), C (p×q) Gaussian; `H = CCᵀ ⊗ AᵀA`, `g = vec(−AᵀBCᵀ)`.
pub fn gen_penrose(n: usize, p: usize, seed: u64) -> Result<QpsInstance> {
    check_sizes(n, p)?;
    let class = ProblemClass::Penrose;
    let mut rng = RngStream::for_instance(class.tag(), n, p, seed);
    let (lo, hi) = regression_range(n);
    let m = rng.uniform_inclusive(lo, hi);
    let q = rng.uniform_inclusive(lo, hi);
    let a = gaussian_matrix(&mut rng, m, n);
    let b = gaussian_matrix(&mut rng, m, q);
    let c = gaussian_matrix(&mut rng, p, q);
    let (h, g) = regression_data(&a, &b, &c)?;
    let aux = GeneratorWitness {
        m,
        a,
        b,
        c: Some(c),
        q: Some(q),
    };
    QpsInstance::new(n, p, h, g, class, seed, Some(aux))
}

/// `H = CCᵀ ⊗ AᵀA` and `g = vec(−AᵀBCᵀ)`.
pub fn regression_data(
    a: &DenseMatrix,
    b: &DenseMatrix,
    c: &DenseMatrix,
) -> Result<(SymMatrix, Vec<f64>)> {
    let ata = a.t_matmul(a)?;
    let cct = c.matmul(&c.transpose())?;
    let h = SymMatrix::from_dense(&kron(&cct, &ata))?;
    let atbct = a.t_matmul(b)?.matmul(&c.transpose())?;
    let g = vec(&atbct).into_iter().map(|v| -v).collect();
    Ok((h, g))
}

/// Dispatches to the generator for `class`.
pub fn generate(class: ProblemClass, n: usize, p: usize, seed: u64) -> Result<QpsInstance> {
    match class {
        ProblemClass::Random => gen_random(n, p, seed),
        ProblemClass::BlockDiag => gen_blockdiag(n, p, seed),
        ProblemClass::Procrustes => gen_procrustes(n, p, seed),
        ProblemClass::Penrose => gen_penrose(n, p, seed),
    }
}
