//! Semidefinite relaxations of a QPS instance.
//!
//! Every program uses the same variables: the upper triangle of the lifted
//! matrix `Y = [[1, uᵀ], [u, X]]` of order `1 + np`, with `Y(a, b)` (`a <= b`)
//! stored at index `b(b+1)/2 + a`. Entry `u_{ji} = U(i, j)` sits at
//! `Y(0, 1 + jn + i)` and `[X_jk]_{il}` at `Y(1 + jn + i, 1 + kn + l)`
//! (0-based throughout).
//!
//! | relaxation | blocks                              |
//! |------------|-------------------------------------|
//! | Shor       | `Y`                                 |
//! | DiagSum    | `Y`, `I_n − Σ_j X_jj`               |
//! | Hadamard   | DiagSum + `[[I_p, Dᵀ], [D, I_n]]`   |
//! | Kron       | DiagSum + `M(u, X)`                 |

mod lifted;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::QpsInstance;
use crate::linalg::{kron, DenseMatrix, SymMatrix};
use crate::solver::{BlockLabel, ConicProgram, ConicSolution, PsdBlock};

pub use lifted::LiftedPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relaxation {
    Shor,
    #[serde(rename = "diagsum")]
    DiagSum,
    Hadamard,
    Kron,
}

impl Relaxation {
    pub const ALL: [Relaxation; 4] = [
        Relaxation::Shor,
        Relaxation::DiagSum,
        Relaxation::Hadamard,
        Relaxation::Kron,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Relaxation::Shor => "shor",
            Relaxation::DiagSum => "diagsum",
            Relaxation::Hadamard => "hadamard",
            Relaxation::Kron => "kron",
        }
    }

    pub fn build(self, inst: &QpsInstance) -> ConicProgram {
        match self {
            Relaxation::Shor => build_shor(inst),
            Relaxation::DiagSum => build_diagsum(inst),
            Relaxation::Hadamard => build_hadamard(inst),
            Relaxation::Kron => build_kron(inst),
        }
    }
}

impl fmt::Display for Relaxation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Relaxation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Relaxation::ALL
            .into_iter()
            .find(|r| r.tag() == s.to_ascii_lowercase())
            .ok_or_else(|| {
                Error::Parameter(format!(
                    "unknown relaxation `{s}` (expected shor, diagsum, hadamard or kron)"
                ))
            })
    }
}

/// Index of the variable holding `Y(a, b)`.
pub fn y_var(a: usize, b: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    b * (b + 1) / 2 + a
}

/// Row/column of `Y` holding `u_{ji} = U(i, j)`.
pub fn u_index(n: usize, j: usize, i: usize) -> usize {
    1 + j * n + i
}

pub fn num_vars(n: usize, p: usize) -> usize {
    let order = 1 + n * p;
    order * (order + 1) / 2
}

/// The matrix `K_ji = e_{p+i} e_jᵀ + e_j e_{p+i}ᵀ` of order `p + n`, with
/// 1-based `j ∈ 1..=p`, `i ∈ 1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct KjiMatrix {
    pub j: usize,
    pub i: usize,
    pub matrix: SymMatrix,
}

pub fn k_matrix(j: usize, i: usize, n: usize, p: usize) -> Result<KjiMatrix> {
    if !(1..=p).contains(&j) || !(1..=n).contains(&i) {
        return Err(Error::Parameter(format!(
            "K_ji needs 1 <= j <= p = {p} and 1 <= i <= n = {n}, got j = {j}, i = {i}"
        )));
    }
    let mut m = SymMatrix::zeros(p + n);
    m.set(p + i - 1, j - 1, 1.0);
    Ok(KjiMatrix { j, i, matrix: m })
}

/// Evaluates `M(u, X)` literally:
///
/// ```text
/// I + Σ_{j,i} u_{ji} (I ⊗ K_ji + K_ji ⊗ I) + Σ_{j,i,k,l} [X_jk]_{il} K_ji ⊗ K_kl
/// ```
pub fn assemble_m(u: &[f64], x: &SymMatrix, n: usize, p: usize) -> Result<SymMatrix> {
    let np = n * p;
    if u.len() != np || x.order() != np {
        return Err(Error::Parameter(format!(
            "assemble_m needs u of length {np} and X of order {np}, got {} and {}",
            u.len(),
            x.order()
        )));
    }
    let s = n + p;
    let eye = DenseMatrix::identity(s);
    let ks: Vec<DenseMatrix> = (0..p)
        .flat_map(|j| (0..n).map(move |i| (j, i)))
        .map(|(j, i)| k_matrix(j + 1, i + 1, n, p).map(|k| k.matrix.into_dense()))
        .collect::<Result<_>>()?;
    let mut m = DenseMatrix::identity(s * s);
    let acc = |m: &mut DenseMatrix, coef: f64, t: &DenseMatrix| {
        if coef != 0.0 {
            for (dst, src) in m.as_mut_slice().iter_mut().zip(t.as_slice()) {
                *dst += coef * src;
            }
        }
    };
    for j in 0..p {
        for i in 0..n {
            let k = &ks[j * n + i];
            let coef = u[j * n + i];
            acc(&mut m, coef, &kron(&eye, k));
            acc(&mut m, coef, &kron(k, &eye));
        }
    }
    for j in 0..p {
        for i in 0..n {
            for k in 0..p {
                for l in 0..n {
                    let coef = x.get(j * n + i, k * n + l);
                    acc(&mut m, coef, &kron(&ks[j * n + i], &ks[k * n + l]));
                }
            }
        }
    }
    SymMatrix::from_dense(&m)
}

/// Symbolic value of entry (a, b) of `P = [[I_p, Uᵀ], [U, I_n]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
enum PEntry {
    Zero,
    One,
    /// Row of `Y` holding the `U` entry.
    U(usize),
}

fn p_entry(a: usize, b: usize, n: usize, p: usize) -> PEntry {
    if a == b {
        PEntry::One
    } else if a < p && b >= p {
        PEntry::U(u_index(n, a, b - p))
    } else if b < p && a >= p {
        PEntry::U(u_index(n, b, a - p))
    } else {
        PEntry::Zero
    }
}

/// Coefficient structure of `M(u, X)`: constant entries and
/// `(row, col, var, weight)` entries of the upper triangle. Each entry of
/// `M` is the linearization of a single product `P_ab · P_cd`, so it depends
/// on at most one variable.
pub fn m_structure(n: usize, p: usize) -> PsdBlock {
    let s = n + p;
    let mut block = PsdBlock::new(BlockLabel::M, s * s);
    for a in 0..s {
        for c in 0..s {
            let row = a * s + c;
            for b in 0..s {
                let pab = p_entry(a, b, n, p);
                if pab == PEntry::Zero {
                    continue;
                }
                for d in 0..s {
                    let col = b * s + d;
                    if col < row {
                        continue;
                    }
                    match (pab, p_entry(c, d, n, p)) {
                        (_, PEntry::Zero) => {}
                        (PEntry::One, PEntry::One) => block.push_const(row, col, 1.0),
                        (PEntry::One, PEntry::U(r)) | (PEntry::U(r), PEntry::One) => {
                            block.push(row, col, y_var(0, r), 1.0)
                        }
                        (PEntry::U(r1), PEntry::U(r2)) => block.push(row, col, y_var(r1, r2), 1.0),
                        (PEntry::Zero, _) => unreachable!(),
                    }
                }
            }
        }
    }
    block
}

fn y_block(np: usize) -> PsdBlock {
    let order = 1 + np;
    let mut block = PsdBlock::new(BlockLabel::Y, order);
    for b in 0..order {
        for a in 0..=b {
            block.push(a, b, y_var(a, b), 1.0);
        }
    }
    block
}

fn diagsum_block(n: usize, p: usize) -> PsdBlock {
    let mut block = PsdBlock::new(BlockLabel::SlackDiagSum, n);
    for i in 0..n {
        block.push_const(i, i, 1.0);
        for l in i..n {
            for j in 0..p {
                block.push(i, l, y_var(u_index(n, j, i), u_index(n, j, l)), -1.0);
            }
        }
    }
    block
}

fn hadamard_block(n: usize, p: usize) -> PsdBlock {
    let mut block = PsdBlock::new(BlockLabel::Hadamard, n + p);
    for a in 0..(n + p) {
        block.push_const(a, a, 1.0);
    }
    for j in 0..p {
        for i in 0..n {
            let r = u_index(n, j, i);
            block.push(j, p + i, y_var(r, r), 1.0);
        }
    }
    block
}

/// Shor: `Y ⪰ 0`, `Y00 = 1`, `tr X_jj = 1`, `tr X_jk = 0` for `j < k`,
/// objective `H • X + 2gᵀu`.
pub fn build_shor(inst: &QpsInstance) -> ConicProgram {
    let (n, p, np) = (inst.n(), inst.p(), inst.np());
    let mut prog = ConicProgram::new(num_vars(n, p));
    let h = inst.h();
    for a in 0..np {
        prog.objective[y_var(1 + a, 1 + a)] = h.get(a, a);
        for b in (a + 1)..np {
            prog.objective[y_var(1 + a, 1 + b)] = 2.0 * h.get(a, b);
        }
        prog.objective[y_var(0, 1 + a)] = 2.0 * inst.g()[a];
    }
    prog.add_equality(vec![(y_var(0, 0), 1.0)], 1.0);
    for j in 0..p {
        for k in j..p {
            let coeffs = (0..n)
                .map(|i| (y_var(u_index(n, j, i), u_index(n, k, i)), 1.0))
                .collect();
            prog.add_equality(coeffs, if j == k { 1.0 } else { 0.0 });
        }
    }
    prog.blocks.push(y_block(np));
    prog
}

/// For `n = p` the trace constraints force `I_n − Σ_j X_jj` to have zero
/// trace, so the LMI holds only with equality and has no interior. It is
/// then imposed as the equalities `Σ_j X_jj = I_n` instead of a block.
pub fn build_diagsum(inst: &QpsInstance) -> ConicProgram {
    let (n, p) = (inst.n(), inst.p());
    let mut prog = build_shor(inst);
    if n > p {
        prog.blocks.push(diagsum_block(n, p));
        return prog;
    }
    for i in 0..n {
        for l in i..n {
            let coeffs = (0..p)
                .map(|j| (y_var(u_index(n, j, i), u_index(n, j, l)), 1.0))
                .collect();
            prog.add_equality(coeffs, if i == l { 1.0 } else { 0.0 });
        }
    }
    prog
}

pub fn build_hadamard(inst: &QpsInstance) -> ConicProgram {
    let mut prog = build_diagsum(inst);
    prog.blocks.push(hadamard_block(inst.n(), inst.p()));
    prog
}

pub fn build_kron(inst: &QpsInstance) -> ConicProgram {
    let mut prog = build_diagsum(inst);
    prog.blocks.push(m_structure(inst.n(), inst.p()));
    prog
}

/// Reads `(u, X, Y)` from an optimal solution of a program built here.
pub fn extract_lifted(sol: &ConicSolution, n: usize, p: usize) -> Result<LiftedPoint> {
    if !sol.is_optimal() {
        return Err(Error::Solver(format!(
            "cannot extract a lifted point: solver status is {}",
            sol.status
        )));
    }
    if sol.x.len() != num_vars(n, p) {
        return Err(Error::Dimension(format!(
            "solution has {} variables, expected {} for n = {n}, p = {p}",
            sol.x.len(),
            num_vars(n, p)
        )));
    }
    let y = SymMatrix::from_upper_fn(1 + n * p, |a, b| sol.x[y_var(a, b)]);
    LiftedPoint::from_y(y, n, p)
}
