//! Infeasible primal-dual interior-point method, HKM direction with
//! Mehrotra predictor-corrector.
//!
//! Iterates `(x, Z_k ≻ 0)` on the primal side and `(λ, W_k ≻ 0)` on the
//! dual side. Residuals:
//!
//! ```text
//! r_p = b − A x
//! r_s = F_0 + 𝒜x − Z
//! r_d = c − Aᵀλ − 𝒜*(W)
//! ```
//!
//! Eliminating `ΔZ = 𝒜Δx + r_s` and `ΔW = R_c − sym(Z⁻¹ ΔZ W)` leaves
//! `−G Δx + AᵀΔλ = h`, `A Δx = r_p` with the Schur matrix
//! `G_uv = Σ_k tr(F_ku Z_k⁻¹ F_kv W_k)`.

use std::time::Instant;

use super::dualize::{dualize, Dualized};
use super::kkt::{dual_objective, kkt_residuals, relative_gap, KktResiduals};
use super::program::ConicProgram;
use super::reduce::reduce_equalities;
use super::{ConicSolution, SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, gemm_acc, max_abs, sym_eigvals, Cholesky, SymMatrix};

/// Fraction of the distance to the cone boundary taken per step.
const STEP_FRACTION: f64 = 0.98;
/// Objective magnitude (relative to the data) treated as divergence.
const DIVERGENCE: f64 = 1e10;
const STALL_STEP: f64 = 1e-8;
const STALL_COUNT: usize = 3;
const SHORT_STEP: f64 = 0.1;
const CENTERING: f64 = 0.5;
const REFINE_STEPS: usize = 10;

struct Block {
    n: usize,
    f0: Vec<f64>,
    /// Full (both triangles) entries grouped by variable.
    vars: Vec<usize>,
    starts: Vec<usize>,
    ents: Vec<(u32, u32, f64)>,
}

impl Block {
    fn build(prog: &ConicProgram, k: usize) -> Self {
        let b = &prog.blocks[k];
        let n = b.order;
        let mut f0 = vec![0.0; n * n];
        for e in &b.constant {
            let (r, c) = (e.row as usize, e.col as usize);
            f0[r * n + c] += e.value;
            if r != c {
                f0[c * n + r] += e.value;
            }
        }
        let mut full: Vec<(u32, u32, u32, f64)> = Vec::with_capacity(2 * b.entries.len());
        for e in &b.entries {
            full.push((e.var, e.row, e.col, e.weight));
            if e.row != e.col {
                full.push((e.var, e.col, e.row, e.weight));
            }
        }
        full.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));
        let mut vars = Vec::new();
        let mut starts = Vec::new();
        let mut ents = Vec::with_capacity(full.len());
        for (i, &(v, r, c, w)) in full.iter().enumerate() {
            if i == 0 || full[i - 1].0 != v {
                vars.push(v as usize);
                starts.push(ents.len());
            }
            ents.push((r, c, w));
        }
        starts.push(ents.len());
        Self {
            n,
            f0,
            vars,
            starts,
            ents,
        }
    }

    fn group(&self, local: usize) -> &[(u32, u32, f64)] {
        &self.ents[self.starts[local]..self.starts[local + 1]]
    }

    /// `Σ_v x_v F_v` as a dense matrix.
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for (local, &v) in self.vars.iter().enumerate() {
            let xv = x[v];
            if xv == 0.0 {
                continue;
            }
            for &(r, c, w) in self.group(local) {
                out[r as usize * n + c as usize] += w * xv;
            }
        }
        out
    }

    /// `out[v] += scale · F_v • M` for a dense (not necessarily symmetric) `M`.
    fn adjoint_acc(&self, m: &[f64], scale: f64, out: &mut [f64]) {
        let n = self.n;
        for (local, &v) in self.vars.iter().enumerate() {
            let s: f64 = self
                .group(local)
                .iter()
                .map(|&(r, c, w)| w * m[r as usize * n + c as usize])
                .sum();
            out[v] += scale * s;
        }
    }

    /// Adds this block's contribution `tr(F_u P F_v Q)` to the Schur matrix.
    fn schur_acc(&self, p: &[f64], q: &[f64], g: &mut [f64], nv: usize) {
        let n = self.n;
        let nloc = self.vars.len();
        let mut acc = vec![0.0; nloc];
        for ui in 0..nloc {
            acc[ui..].iter_mut().for_each(|a| *a = 0.0);
            for &(a, b, w) in self.group(ui) {
                let prow = &p[b as usize * n..(b as usize + 1) * n];
                let qrow = &q[a as usize * n..(a as usize + 1) * n];
                for vi in ui..nloc {
                    let mut s = 0.0;
                    for &(c, d, w2) in self.group(vi) {
                        s += w2 * prow[c as usize] * qrow[d as usize];
                    }
                    acc[vi] += w * s;
                }
            }
            let u = self.vars[ui];
            for vi in ui..nloc {
                let v = self.vars[vi];
                g[u * nv + v] += acc[vi];
                if u != v {
                    g[v * nv + u] += acc[vi];
                }
            }
        }
    }

    fn frob_norm_sq(&self, local: usize) -> f64 {
        self.group(local).iter().map(|e| e.2 * e.2).sum()
    }
}

fn matmul(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    gemm_acc(n, n, n, a, b, &mut c);
    c
}

/// `(M + Mᵀ)/2`.
fn sym_part(n: usize, m: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        out[i * n + i] = m[i * n + i];
        for j in (i + 1)..n {
            let v = 0.5 * (m[i * n + j] + m[j * n + i]);
            out[i * n + j] = v;
            out[j * n + i] = v;
        }
    }
    out
}

fn inner(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b)
}

/// Largest `α` with `S + α D ⪰ 0`, given `L⁻¹` for `S = LLᵀ`.
fn max_step(n: usize, linv: &[f64], d: &[f64]) -> Result<f64> {
    // T = L⁻¹ D, then R = T L⁻ᵀ with R_ij = Σ_{k<=j} T_ik L⁻¹_jk.
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        let trow = &mut t[i * n..(i + 1) * n];
        for k in 0..=i {
            let l = linv[i * n + k];
            if l != 0.0 {
                axpy(l, &d[k * n..(k + 1) * n], trow);
            }
        }
    }
    let mut r = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = dot(&t[i * n..i * n + j + 1], &linv[j * n..j * n + j + 1]);
            let w = dot(&t[j * n..j * n + i + 1], &linv[i * n..i * n + i + 1]);
            let s = 0.5 * (v + w);
            r[i * n + j] = s;
            r[j * n + i] = s;
        }
    }
    let vals = sym_eigvals(&SymMatrix::from_row_major_unchecked(n, r))?;
    let lmin = vals.last().copied().unwrap_or(0.0);
    Ok(if lmin < 0.0 {
        -1.0 / lmin
    } else {
        f64::INFINITY
    })
}

struct Factors {
    zinv: Vec<f64>,
    linv_z: Vec<f64>,
    linv_w: Vec<f64>,
}

struct Direction {
    dx: Vec<f64>,
    dl: Vec<f64>,
    dz: Vec<Vec<f64>>,
    dw: Vec<Vec<f64>>,
    /// `Z⁻¹ ΔZ` per block, reused by the corrector.
    zinv_dz: Vec<Vec<f64>>,
}

/// Cholesky factor of `D G D` with `D = diag(G)^(-1/2)`, regularized with
/// a growing multiple of the identity if the plain factorization fails.
struct ScaledCholesky {
    chol: Cholesky,
    d: Vec<f64>,
}

impl ScaledCholesky {
    fn factor(n: usize, mut g: Vec<f64>) -> Result<Self> {
        let d: Vec<f64> = (0..n)
            .map(|i| {
                let v = g[i * n + i];
                if v > 0.0 {
                    1.0 / v.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        for i in 0..n {
            for j in 0..n {
                g[i * n + j] *= d[i] * d[j];
            }
        }
        let mut chol = Cholesky::factor_slice(n, &g);
        let mut reg = 1e-15;
        while chol.is_err() && reg < 1e-3 {
            let mut gr = g.clone();
            for i in 0..n {
                gr[i * n + i] += reg;
            }
            chol = Cholesky::factor_slice(n, &gr);
            reg *= 10.0;
        }
        Ok(Self { chol: chol?, d })
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        for (v, d) in b.iter_mut().zip(&self.d) {
            *v *= d;
        }
        self.chol.solve_in_place(b);
        for (v, d) in b.iter_mut().zip(&self.d) {
            *v *= d;
        }
    }
}

/// Trailing `(n−m)×(n−m)` block of a row-major n×n matrix.
fn trailing_block(n: usize, m: usize, g: &[f64]) -> Vec<f64> {
    let k = n - m;
    let mut out = vec![0.0; k * k];
    for i in 0..k {
        out[i * k..(i + 1) * k].copy_from_slice(&g[(m + i) * n + m..(m + i + 1) * n]);
    }
    out
}

struct Schur {
    /// Factor of `Q₂ᵀ G Q₂`.
    chol: ScaledCholesky,
    /// First `m` rows of `Qᵀ G Q`.
    top: Vec<f64>,
}

/// Householder QR of `Aᵀ = Q [R; 0]` for the kept equality rows. The
/// trailing columns `Q₂` of `Q` span the null space of `A`, which lets the
/// Newton system be solved on that subspace instead of through `A G⁻¹ Aᵀ`.
struct EqBasis {
    m: usize,
    /// Reflectors `I − τ v vᵀ`, `v` supported on indices `j..`.
    v: Vec<Vec<f64>>,
    tau: Vec<f64>,
    /// Upper-triangular `R`, row-major m×m.
    r: Vec<f64>,
}

impl EqBasis {
    fn new(mut cols: Vec<Vec<f64>>, nv: usize) -> Self {
        let m = cols.len();
        let mut v = Vec::with_capacity(m);
        let mut tau = Vec::with_capacity(m);
        let mut r = vec![0.0; m * m];
        for j in 0..m {
            let x = &cols[j];
            let norm = dot(&x[j..], &x[j..]).sqrt();
            let alpha = if x[j] > 0.0 { -norm } else { norm };
            let mut vj = vec![0.0; nv];
            vj[j..].copy_from_slice(&x[j..]);
            vj[j] -= alpha;
            let vv = dot(&vj[j..], &vj[j..]);
            let t = if vv > 0.0 { 2.0 / vv } else { 0.0 };
            for col in cols.iter_mut().skip(j) {
                let s = t * dot(&vj[j..], &col[j..]);
                axpy(-s, &vj[j..], &mut col[j..]);
            }
            for (i, col) in cols.iter().enumerate().skip(j) {
                r[j * m + i] = col[j];
            }
            v.push(vj);
            tau.push(t);
        }
        Self { m, v, tau, r }
    }

    fn reflect(&self, j: usize, x: &mut [f64]) {
        let vj = &self.v[j][j..];
        let s = self.tau[j] * dot(vj, &x[j..]);
        axpy(-s, vj, &mut x[j..]);
    }

    /// `x ← Qᵀ x`.
    fn apply_qt(&self, x: &mut [f64]) {
        for j in 0..self.m {
            self.reflect(j, x);
        }
    }

    /// `x ← Q x`.
    fn apply_q(&self, x: &mut [f64]) {
        for j in (0..self.m).rev() {
            self.reflect(j, x);
        }
    }

    /// `G ← Qᵀ G Q` for a symmetric row-major `G`.
    fn congruence(&self, n: usize, g: &mut [f64]) {
        for j in 0..self.m {
            let vj = &self.v[j];
            let t = self.tau[j];
            // p = τ G v, w = p − (τ/2)(vᵀp) v, G ← G − v wᵀ − w vᵀ
            let mut p = vec![0.0; n];
            for (i, pi) in p.iter_mut().enumerate() {
                *pi = t * dot(&g[i * n + j..(i + 1) * n], &vj[j..]);
            }
            let k = 0.5 * t * dot(&vj[j..], &p[j..]);
            let mut wv = p;
            axpy(-k, vj, &mut wv);
            for i in 0..n {
                let (vi, wi) = (vj[i], wv[i]);
                let row = &mut g[i * n..(i + 1) * n];
                // v vanishes before index j
                let from = if i >= j { 0 } else { j };
                for c in from..n {
                    row[c] -= vi * wv[c] + wi * vj[c];
                }
            }
        }
    }

    /// Solves `Rᵀ y = b`.
    fn solve_rt(&self, b: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = b.to_vec();
        for i in 0..m {
            let mut s = y[i];
            for k in 0..i {
                s -= self.r[k * m + i] * y[k];
            }
            y[i] = s / self.r[i * m + i];
        }
        y
    }

    /// Solves `R y = b`.
    fn solve_r(&self, b: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = b.to_vec();
        for i in (0..m).rev() {
            let mut s = y[i];
            for k in (i + 1)..m {
                s -= self.r[i * m + k] * y[k];
            }
            y[i] = s / self.r[i * m + i];
        }
        y
    }
}

struct State<'a> {
    prog: &'a ConicProgram,
    blocks: Vec<Block>,
    rows: Vec<usize>,
    nv: usize,
    basis: EqBasis,
    /// Factor of `Q₂ᵀ 𝒜*𝒜 Q₂`.
    gram: ScaledCholesky,
    /// Dual equation error above which directions are corrected.
    fix_threshold: f64,
}

impl<'a> State<'a> {
    fn eq_apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|&r| self.prog.equalities[r].eval(x))
            .collect()
    }

    fn eq_adjoint_acc(&self, l: &[f64], scale: f64, out: &mut [f64]) {
        for (&r, &lr) in self.rows.iter().zip(l) {
            for &(v, a) in &self.prog.equalities[r].coeffs {
                out[v as usize] += scale * a * lr;
            }
        }
    }

    fn factor_schur(&self, w: &[Vec<f64>], f: &[Factors]) -> Result<Schur> {
        let nv = self.nv;
        let m = self.basis.m;
        let mut g = vec![0.0; nv * nv];
        for (k, b) in self.blocks.iter().enumerate() {
            b.schur_acc(&f[k].zinv, &w[k], &mut g, nv);
        }
        self.basis.congruence(nv, &mut g);
        let chol = ScaledCholesky::factor(nv - m, trailing_block(nv, m, &g))?;
        g.truncate(m * nv);
        Ok(Schur { chol, top: g })
    }

    /// Solves `−G Δx + AᵀΔλ = h`, `A Δx = r_p` on the null space of `A`.
    fn solve_reduced(&self, schur: &Schur, h: &[f64], rp: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let nv = self.nv;
        let m = self.basis.m;
        // Qᵀ Δx = [a; ξ] with Rᵀ a = r_p.
        let a = self.basis.solve_rt(rp);
        let mut hq = h.to_vec();
        self.basis.apply_qt(&mut hq);
        // G₂₂ ξ = −(h₂ + G₂₁ a)
        let mut xi: Vec<f64> = hq[m..].iter().map(|v| -v).collect();
        for (i, &ai) in a.iter().enumerate() {
            axpy(-ai, &schur.top[i * nv + m..(i + 1) * nv], &mut xi);
        }
        schur.chol.solve_in_place(&mut xi);
        // R Δλ = h₁ + G₁₁ a + G₁₂ ξ
        let rhs: Vec<f64> = (0..m)
            .map(|i| {
                let row = &schur.top[i * nv..(i + 1) * nv];
                hq[i] + dot(&row[..m], &a) + dot(&row[m..], &xi)
            })
            .collect();
        let dl = self.basis.solve_r(&rhs);
        let mut dx = a;
        dx.extend_from_slice(&xi);
        self.basis.apply_q(&mut dx);
        (dx, dl)
    }

    /// `ΔZ = 𝒜Δx + r_s` and `ΔW = R_c − sym(Z⁻¹ ΔZ W)`.
    fn cone_parts(
        &self,
        f: &[Factors],
        w: &[Vec<f64>],
        rs: &[Vec<f64>],
        rc: &[Vec<f64>],
        dx: &[f64],
    ) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut dz = Vec::with_capacity(self.blocks.len());
        let mut dw = Vec::with_capacity(self.blocks.len());
        let mut zinv_dz = Vec::with_capacity(self.blocks.len());
        for (k, b) in self.blocks.iter().enumerate() {
            let n = b.n;
            let mut d = b.apply(dx);
            axpy(1.0, &rs[k], &mut d);
            let zd = matmul(n, &f[k].zinv, &d);
            let zdw = sym_part(n, &matmul(n, &zd, &w[k]));
            let mut dwk = rc[k].clone();
            axpy(-1.0, &zdw, &mut dwk);
            dz.push(d);
            dw.push(dwk);
            zinv_dz.push(zd);
        }
        (dz, dw, zinv_dz)
    }

    fn gram_factor(&self) -> Result<ScaledCholesky> {
        let nv = self.nv;
        let mut g = vec![0.0; nv * nv];
        for b in &self.blocks {
            let mut by_pos: Vec<(u32, u32, usize, f64)> = Vec::with_capacity(b.ents.len());
            for (local, &v) in b.vars.iter().enumerate() {
                for &(r, c, w) in b.group(local) {
                    by_pos.push((r, c, v, w));
                }
            }
            by_pos.sort_by(|x, y| (x.0, x.1, x.2).cmp(&(y.0, y.1, y.2)));
            for run in by_pos.chunk_by(|x, y| (x.0, x.1) == (y.0, y.1)) {
                for &(_, _, u, wu) in run {
                    for &(_, _, v, wv) in run {
                        g[u * nv + v] += wu * wv;
                    }
                }
            }
        }
        self.basis.congruence(nv, &mut g);
        let m = self.basis.m;
        ScaledCholesky::factor(nv - m, trailing_block(nv, m, &g))
    }

    /// Minimum-norm `(δW, δλ)` with `𝒜*(δW) + Aᵀδλ = e`: `δW = 𝒜(Q₂ y)` with
    /// `(Q₂ᵀ 𝒜*𝒜 Q₂) y = Q₂ᵀ e`, then `δλ` from the remainder.
    fn dual_correction(&self, e: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let m = self.basis.m;
        let mut eq = e.to_vec();
        self.basis.apply_qt(&mut eq);
        let mut y2 = eq[m..].to_vec();
        self.gram.solve_in_place(&mut y2);
        let mut y = vec![0.0; m];
        y.extend_from_slice(&y2);
        self.basis.apply_q(&mut y);
        let dw: Vec<Vec<f64>> = self.blocks.iter().map(|b| b.apply(&y)).collect();
        let mut rest = e.to_vec();
        for (b, d) in self.blocks.iter().zip(&dw) {
            b.adjoint_acc(d, -1.0, &mut rest);
        }
        self.basis.apply_qt(&mut rest);
        let dl = self.basis.solve_r(&rest[..m]);
        (dw, dl)
    }

    /// `G d` applied through the cone blocks rather than the assembled matrix.
    fn schur_apply(&self, f: &[Factors], w: &[Vec<f64>], d: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nv];
        for (k, b) in self.blocks.iter().enumerate() {
            let n = b.n;
            let zd = matmul(n, &f[k].zinv, &b.apply(d));
            let t = sym_part(n, &matmul(n, &zd, &w[k]));
            b.adjoint_acc(&t, 1.0, &mut out);
        }
        out
    }

    /// Solves the Newton system for a given complementarity right-hand side.
    ///
    /// The factored Schur matrix loses accuracy as the iterates approach the
    /// boundary, so it serves as a preconditioner for projected conjugate
    /// gradients on `min ½ΔxᵀGΔx + hᵀΔx s.t. AΔx = r_p`, with `G` applied
    /// through the blocks.
    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        schur: &Schur,
        f: &[Factors],
        w: &[Vec<f64>],
        rp: &[f64],
        rs: &[Vec<f64>],
        rd: &[f64],
        rs_term: &[Vec<f64>],
        rc: &[Vec<f64>],
    ) -> Direction {
        // h = r_d − 𝒜*(R_c) + 𝒜*(sym(Z⁻¹ r_s W))
        let mut h = rd.to_vec();
        for (k, b) in self.blocks.iter().enumerate() {
            b.adjoint_acc(&rc[k], -1.0, &mut h);
            b.adjoint_acc(&rs_term[k], 1.0, &mut h);
        }
        // Residual of the unreduced equations at (Δx, Δλ):
        // e_d = r_d − AᵀΔλ − 𝒜*(ΔW) = h + GΔx − AᵀΔλ, e_p = r_p − AΔx.
        let residual = |dx: &[f64], dl: &[f64]| {
            let mut ed = self.schur_apply(f, w, dx);
            axpy(1.0, &h, &mut ed);
            self.eq_adjoint_acc(dl, -1.0, &mut ed);
            let adx = self.eq_apply(dx);
            let ep: Vec<f64> = rp.iter().zip(&adx).map(|(r, a)| r - a).collect();
            (ed, ep)
        };
        let size = |(ed, ep): &(Vec<f64>, Vec<f64>)| max_abs(ed).max(max_abs(ep));
        let target = 1e-15 * (1.0 + max_abs(&h));

        // Iterative refinement with the factored Schur matrix.
        let (mut dx, mut dl) = self.solve_reduced(schur, &h, rp);
        let mut res = residual(&dx, &dl);
        let mut err = size(&res);
        for _ in 0..REFINE_STEPS {
            if err <= target {
                break;
            }
            let (cx, cl) = self.solve_reduced(schur, &res.0, &res.1);
            let mut dx2 = dx.clone();
            axpy(1.0, &cx, &mut dx2);
            let mut dl2 = dl.clone();
            axpy(1.0, &cl, &mut dl2);
            let res2 = residual(&dx2, &dl2);
            let e2 = size(&res2);
            let progress = e2 < 0.5 * err;
            if e2 < err {
                (dx, dl, res, err) = (dx2, dl2, res2, e2);
            }
            if !progress {
                break;
            }
        }
        let (dz, mut dw, zinv_dz) = self.cone_parts(f, w, rs, rc, &dx);
        // A Schur solve error large enough to matter for the dual tolerance
        // is absorbed by the smallest correction (δW, δλ) with
        // 𝒜*(δW) + Aᵀδλ = e_d, so the dual residual does not accumulate it.
        // Smaller errors are left alone: the correction is not aligned with
        // the cone and can block the dual step.
        if max_abs(&res.0) > self.fix_threshold {
            let (dw_fix, dl_fix) = self.dual_correction(&res.0);
            for (d, c) in dw.iter_mut().zip(&dw_fix) {
                axpy(1.0, c, d);
            }
            axpy(1.0, &dl_fix, &mut dl);
        }
        Direction {
            dx,
            dl,
            dz,
            dw,
            zinv_dz,
        }
    }
}

pub(crate) fn solve(prog: &ConicProgram, settings: &SolverSettings) -> Result<ConicSolution> {
    let start = Instant::now();
    let reduced = reduce_equalities(prog);
    if !reduced.is_consistent() {
        let mut sol = ConicSolution::certificate_only(prog, SolveStatus::PrimalInfeasible);
        sol.wall_time_seconds = start.elapsed().as_secs_f64();
        return Ok(sol);
    }
    if let Some(d) = dualize(prog, &reduced.kept) {
        if d.prog.num_vars < prog.num_vars {
            return solve_via_dual(prog, &d, settings, start);
        }
    }
    solve_lmi(prog, &reduced.kept, settings, start)
}

/// Solves the dual reformulation and maps the result back. The original
/// program's residuals decide the status; if the reformulation converged but
/// the mapped point misses the tolerances, the reformulation is re-solved
/// with tighter tolerances.
fn solve_via_dual(
    prog: &ConicProgram,
    d: &Dualized,
    settings: &SolverSettings,
    start: Instant,
) -> Result<ConicSolution> {
    let mut inner = settings.clone();
    let mut iterations = 0;
    for attempt in 0..3 {
        let sol = solve_lmi(&d.prog, &[], &inner, start)?;
        iterations += sol.iterations;
        let status = match sol.status {
            SolveStatus::PrimalInfeasible => SolveStatus::DualInfeasible,
            SolveStatus::DualInfeasible => SolveStatus::PrimalInfeasible,
            other => other,
        };
        let x = d.primal_x(&sol.dual_blocks);
        let eq_duals = d.eq_duals(&sol.x, prog.equalities.len());
        let dual_blocks = sol.primal_blocks;
        let residuals = kkt_residuals(prog, &x, &eq_duals, &dual_blocks)?;
        let ok = residuals.within(settings.eps_primal, settings.eps_dual, settings.eps_gap);
        if status == SolveStatus::Optimal && !ok && attempt < 2 {
            let eps = 0.1 * inner.eps_primal.min(inner.eps_dual).min(inner.eps_gap);
            inner = inner.with_tolerance(eps);
            continue;
        }
        let status = match status {
            SolveStatus::Optimal if !ok => SolveStatus::Stalled,
            other => other,
        };
        let primal_blocks = prog.blocks.iter().map(|b| b.value(&x)).collect();
        let primal_objective = prog.objective_value(&x);
        let dual_objective = dual_objective(prog, &eq_duals, &dual_blocks);
        return Ok(ConicSolution {
            status,
            x,
            primal_blocks,
            eq_duals,
            dual_blocks,
            primal_objective,
            dual_objective,
            residuals,
            iterations,
            wall_time_seconds: start.elapsed().as_secs_f64(),
        });
    }
    unreachable!("the last attempt always returns")
}

fn solve_lmi(
    prog: &ConicProgram,
    kept_rows: &[usize],
    settings: &SolverSettings,
    start: Instant,
) -> Result<ConicSolution> {
    let blocks: Vec<Block> = (0..prog.blocks.len())
        .map(|k| Block::build(prog, k))
        .collect();
    let nv = prog.num_vars;
    let mut touched = vec![false; nv];
    for b in &blocks {
        for &v in &b.vars {
            touched[v] = true;
        }
    }
    if let Some(v) = touched.iter().position(|t| !t) {
        return Err(Error::Validation(format!(
            "variable {v} appears in no cone block; the interior-point method needs every \
             variable to enter some block"
        )));
    }
    let at_cols = kept_rows
        .iter()
        .map(|&r| {
            let mut col = vec![0.0; nv];
            for &(v, a) in &prog.equalities[r].coeffs {
                col[v as usize] += a;
            }
            col
        })
        .collect();
    let st = State {
        prog,
        blocks,
        rows: kept_rows.to_vec(),
        nv,
        basis: EqBasis::new(at_cols, nv),
        gram: ScaledCholesky::factor(0, Vec::new())?,
        fix_threshold: 0.1 * settings.eps_dual * (1.0 + max_abs(&prog.objective)),
    };
    let st = State {
        gram: st.gram_factor()?,
        ..st
    };
    let m = st.rows.len();
    let b_red: Vec<f64> = st.rows.iter().map(|&r| prog.equalities[r].rhs).collect();
    let c = &prog.objective;

    let b_scale = 1.0
        + prog
            .equalities
            .iter()
            .fold(0.0f64, |a, r| a.max(r.rhs.abs()));
    let f0_scale = 1.0 + st.blocks.iter().fold(0.0f64, |a, b| a.max(max_abs(&b.f0)));
    let c_scale = 1.0 + max_abs(c);

    // Starting point: scaled identities.
    let mut x = vec![0.0; nv];
    let mut lam = vec![0.0; m];
    let mut z: Vec<Vec<f64>> = Vec::new();
    let mut w: Vec<Vec<f64>> = Vec::new();
    for b in &st.blocks {
        let n = b.n;
        let nf = n as f64;
        let mut xi = 10.0f64.max(nf.sqrt());
        let mut eta = 10.0f64.max(nf.sqrt());
        for local in 0..b.vars.len() {
            let fnorm = b.frob_norm_sq(local).sqrt();
            xi = xi.max(nf * (1.0 + c[b.vars[local]].abs()) / (1.0 + fnorm));
            eta = eta.max(fnorm);
        }
        eta = eta.max(b.f0.iter().map(|v| v * v).sum::<f64>().sqrt());
        let mut zk = vec![0.0; n * n];
        let mut wk = vec![0.0; n * n];
        for i in 0..n {
            zk[i * n + i] = eta;
            wk[i * n + i] = xi;
        }
        z.push(zk);
        w.push(wk);
    }
    let total_order: f64 = st.blocks.iter().map(|b| b.n as f64).sum();

    let max_iters = settings.effective_max_iters();
    let mut stalls = 0;
    let mut iter = 0;
    let mut last: KktResiduals;
    let status = loop {
        // Residuals.
        let ax = st.eq_apply(&x);
        let rp: Vec<f64> = b_red.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let mut rs = Vec::with_capacity(st.blocks.len());
        for (k, b) in st.blocks.iter().enumerate() {
            let mut r = b.apply(&x);
            axpy(1.0, &b.f0, &mut r);
            axpy(-1.0, &z[k], &mut r);
            rs.push(r);
        }
        let mut rd = c.clone();
        st.eq_adjoint_acc(&lam, -1.0, &mut rd);
        for (k, b) in st.blocks.iter().enumerate() {
            b.adjoint_acc(&w[k], -1.0, &mut rd);
        }
        let pobj = dot(c, &x);
        let dobj = dot(&b_red, &lam)
            - st.blocks
                .iter()
                .zip(&w)
                .map(|(b, wk)| inner(&b.f0, wk))
                .sum::<f64>();
        let mu = st
            .blocks
            .iter()
            .zip(z.iter().zip(&w))
            .map(|(_, (zk, wk))| inner(zk, wk))
            .sum::<f64>()
            / total_order.max(1.0);

        let pinf = (max_abs(&rp) / b_scale)
            .max(rs.iter().fold(0.0f64, |a, r| a.max(max_abs(r))) / f0_scale);
        let dinf = max_abs(&rd) / c_scale;
        let gap = relative_gap(pobj, dobj);
        last = KktResiduals {
            primal: pinf,
            dual: dinf,
            gap,
        };

        if pinf <= settings.eps_primal && dinf <= settings.eps_dual && gap <= settings.eps_gap {
            let (wsym, lam_full) = export_duals(&st, &w, &lam);
            let check = kkt_residuals(prog, &x, &lam_full, &wsym)?;
            if check.within(settings.eps_primal, settings.eps_dual, settings.eps_gap) {
                last = check;
                break SolveStatus::Optimal;
            }
        }
        if dobj > DIVERGENCE * c_scale.max(f0_scale) && dinf <= settings.eps_dual.sqrt() {
            break SolveStatus::PrimalInfeasible;
        }
        if -pobj > DIVERGENCE * c_scale.max(b_scale) && pinf <= settings.eps_primal.sqrt() {
            break SolveStatus::DualInfeasible;
        }
        if iter >= max_iters {
            break SolveStatus::MaxIters;
        }
        if let Some(t) = settings.time_limit_seconds {
            if start.elapsed().as_secs_f64() >= t {
                break SolveStatus::TimeLimit;
            }
        }
        iter += 1;

        // Factorizations.
        let mut factors = Vec::with_capacity(st.blocks.len());
        let mut failed = false;
        for (k, b) in st.blocks.iter().enumerate() {
            let cz = Cholesky::factor_slice(b.n, &z[k]);
            let cw = Cholesky::factor_slice(b.n, &w[k]);
            match (cz, cw) {
                (Ok(cz), Ok(cw)) => factors.push(Factors {
                    zinv: cz.inverse().as_slice().to_vec(),
                    linv_z: cz.l_inverse(),
                    linv_w: cw.l_inverse(),
                }),
                _ => {
                    failed = true;
                    break;
                }
            }
        }
        if failed {
            break SolveStatus::Stalled;
        }
        let schur = match st.factor_schur(&w, &factors) {
            Ok(s) => s,
            Err(_) => break SolveStatus::Stalled,
        };
        let rs_term: Vec<Vec<f64>> = st
            .blocks
            .iter()
            .enumerate()
            .map(|(k, b)| {
                if rs[k].iter().all(|v| *v == 0.0) {
                    vec![0.0; b.n * b.n]
                } else {
                    sym_part(
                        b.n,
                        &matmul(b.n, &matmul(b.n, &factors[k].zinv, &rs[k]), &w[k]),
                    )
                }
            })
            .collect();

        // Predictor.
        let rc_aff: Vec<Vec<f64>> = w.iter().map(|wk| wk.iter().map(|v| -v).collect()).collect();
        let aff = st.direction(&schur, &factors, &w, &rp, &rs, &rd, &rs_term, &rc_aff);
        let (ap_aff, ad_aff) = step_lengths(&st, &factors, &aff, 1.0)?;
        let mut mu_aff = 0.0;
        for k in 0..st.blocks.len() {
            let zk: Vec<f64> = z[k]
                .iter()
                .zip(&aff.dz[k])
                .map(|(a, d)| a + ap_aff * d)
                .collect();
            let wk: Vec<f64> = w[k]
                .iter()
                .zip(&aff.dw[k])
                .map(|(a, d)| a + ad_aff * d)
                .collect();
            mu_aff += inner(&zk, &wk);
        }
        mu_aff /= total_order.max(1.0);
        let sigma = if mu > 0.0 {
            (mu_aff / mu).max(0.0).powi(3).min(1.0)
        } else {
            0.0
        };

        // Corrector.
        let mut rc = Vec::with_capacity(st.blocks.len());
        for (k, b) in st.blocks.iter().enumerate() {
            let n = b.n;
            let second = sym_part(n, &matmul(n, &aff.zinv_dz[k], &aff.dw[k]));
            let mut r: Vec<f64> = factors[k].zinv.iter().map(|v| sigma * mu * v).collect();
            axpy(-1.0, &w[k], &mut r);
            axpy(-1.0, &second, &mut r);
            rc.push(r);
        }
        // A common primal and dual step length keeps the iterates centered
        // well enough to reach tight tolerances on degenerate programs.
        let mut dir = st.direction(&schur, &factors, &w, &rp, &rs, &rd, &rs_term, &rc);
        let (ap, ad) = step_lengths(&st, &factors, &dir, STEP_FRACTION)?;
        let mut alpha = ap.min(ad);
        if alpha < SHORT_STEP {
            // Short steps mean the iterate has drifted off the central path;
            // try a first-order step with stronger centering instead.
            let sc = sigma.max(CENTERING);
            let rc: Vec<Vec<f64>> = (0..st.blocks.len())
                .map(|k| {
                    let mut r: Vec<f64> = factors[k].zinv.iter().map(|v| sc * mu * v).collect();
                    axpy(-1.0, &w[k], &mut r);
                    r
                })
                .collect();
            let alt = st.direction(&schur, &factors, &w, &rp, &rs, &rd, &rs_term, &rc);
            let (bp, bd) = step_lengths(&st, &factors, &alt, STEP_FRACTION)?;
            if bp.min(bd) > alpha {
                (dir, alpha) = (alt, bp.min(bd));
            }
        }

        axpy(alpha, &dir.dx, &mut x);
        for k in 0..st.blocks.len() {
            axpy(alpha, &dir.dz[k], &mut z[k]);
            axpy(alpha, &dir.dw[k], &mut w[k]);
            z[k] = sym_part(st.blocks[k].n, &z[k]);
            w[k] = sym_part(st.blocks[k].n, &w[k]);
        }
        axpy(alpha, &dir.dl, &mut lam);

        if alpha < STALL_STEP {
            stalls += 1;
            if stalls >= STALL_COUNT {
                break SolveStatus::Stalled;
            }
        } else {
            stalls = 0;
        }
    };

    let (dual_blocks, eq_duals) = export_duals(&st, &w, &lam);
    let primal_blocks = prog.blocks.iter().map(|b| b.value(&x)).collect();
    let primal_objective = prog.objective_value(&x);
    let dual_objective = dual_objective(prog, &eq_duals, &dual_blocks);
    Ok(ConicSolution {
        status,
        x,
        primal_blocks,
        eq_duals,
        dual_blocks,
        primal_objective,
        dual_objective,
        residuals: last,
        iterations: iter,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}

fn export_duals(st: &State<'_>, w: &[Vec<f64>], lam: &[f64]) -> (Vec<SymMatrix>, Vec<f64>) {
    let wsym = st
        .blocks
        .iter()
        .zip(w)
        .map(|(b, wk)| SymMatrix::from_row_major_unchecked(b.n, sym_part(b.n, wk)))
        .collect();
    let mut full = vec![0.0; st.prog.equalities.len()];
    for (&r, &l) in st.rows.iter().zip(lam) {
        full[r] = l;
    }
    (wsym, full)
}

fn step_lengths(
    st: &State<'_>,
    f: &[Factors],
    dir: &Direction,
    fraction: f64,
) -> Result<(f64, f64)> {
    let mut ap = f64::INFINITY;
    let mut ad = f64::INFINITY;
    for (k, b) in st.blocks.iter().enumerate() {
        ap = ap.min(max_step(b.n, &f[k].linv_z, &dir.dz[k])?);
        ad = ad.min(max_step(b.n, &f[k].linv_w, &dir.dw[k])?);
    }
    Ok(((fraction * ap).min(1.0), (fraction * ad).min(1.0)))
}
