//! Operator splitting (ADMM) for
//!
//! ```text
//! minimize cᵀx  subject to  Ā x + s = b̄,  s ∈ {0}^m × Π_k S_k
//! ```
//!
//! where the equality rows form the zero cone and each PSD block contributes
//! the rows `−svec(𝒜_k x) + s_k = svec(F_k0)`. The x-update solves one
//! positive-definite system `(σI + ĀᵀRĀ) x̃ = rhs` with a cached Cholesky
//! factor; the s-update projects onto the cones.

use std::ops::Range;
use std::time::Instant;

use super::equilibrate::ruiz_equilibrate;
use super::kkt::{dual_objective, kkt_residuals, KktResiduals};
use super::program::ConicProgram;
use super::reduce::reduce_equalities;
use super::{ConicSolution, SolveStatus, SolverSettings};
use crate::error::Result;
use crate::linalg::{
    dot, eig_rows, max_abs, smat, spectral_sum, svec, svec_index, Cholesky, SvecVector, SymMatrix,
};

const SIGMA: f64 = 1e-6;
const RHO_INIT: f64 = 0.1;
const RHO_EQ_FACTOR: f64 = 1e3;
const CHECK_EVERY: usize = 10;
const ADAPT_EVERY: usize = 50;
const RUIZ_ITERS: usize = 25;
const INFEASIBILITY_TOL: f64 = 1e-7;

struct Scaled {
    rows: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    c: Vec<f64>,
    /// Row range and order of each PSD block.
    cones: Vec<(Range<usize>, usize)>,
    m_eq: usize,
    col: Vec<f64>,
    row: Vec<f64>,
    cost: f64,
}

fn build(prog: &ConicProgram) -> Scaled {
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut rows: Vec<Vec<(usize, f64)>> = prog
        .equalities
        .iter()
        .map(|r| r.coeffs.iter().map(|&(v, a)| (v as usize, a)).collect())
        .collect();
    let mut b: Vec<f64> = prog.equalities.iter().map(|r| r.rhs).collect();
    let m_eq = rows.len();
    let mut cones = Vec::new();
    for block in &prog.blocks {
        let n = block.order;
        let base = rows.len();
        let len = n * (n + 1) / 2;
        rows.extend((0..len).map(|_| Vec::new()));
        b.extend(std::iter::repeat(0.0).take(len));
        for e in &block.entries {
            let (r, c) = (e.row as usize, e.col as usize);
            let f = if r == c { 1.0 } else { sqrt2 };
            rows[base + svec_index(r, c)].push((e.var as usize, -f * e.weight));
        }
        b[base..base + len].copy_from_slice(svec(&block.constant_matrix()).entries());
        cones.push((base..base + len, n));
    }
    let groups: Vec<Range<usize>> = cones.iter().map(|(r, _)| r.clone()).collect();
    let eq = ruiz_equilibrate(&rows, &groups, prog.num_vars, RUIZ_ITERS);
    for (r, entries) in rows.iter_mut().enumerate() {
        for (c, v) in entries.iter_mut() {
            *v *= eq.row[r] * eq.col[*c];
        }
        b[r] *= eq.row[r];
    }
    let mut c: Vec<f64> = prog
        .objective
        .iter()
        .zip(&eq.col)
        .map(|(c, d)| c * d)
        .collect();
    let cmax = max_abs(&c);
    let cost = if cmax > 1e-4 {
        1.0 / cmax.min(1e4)
    } else {
        1.0
    };
    c.iter_mut().for_each(|v| *v *= cost);
    Scaled {
        rows,
        b,
        c,
        cones,
        m_eq,
        col: eq.col,
        row: eq.row,
        cost,
    }
}

fn a_mul(rows: &[Vec<(usize, f64)>], x: &[f64]) -> Vec<f64> {
    rows.iter()
        .map(|r| r.iter().map(|&(c, v)| v * x[c]).sum())
        .collect()
}

fn at_mul_acc(rows: &[Vec<(usize, f64)>], y: &[f64], out: &mut [f64]) {
    for (r, entries) in rows.iter().enumerate() {
        if y[r] == 0.0 {
            continue;
        }
        for &(c, v) in entries {
            out[c] += v * y[r];
        }
    }
}

fn factor(sc: &Scaled, nv: usize, rho: &[f64]) -> Result<Cholesky> {
    let mut k = vec![0.0; nv * nv];
    for i in 0..nv {
        k[i * nv + i] = SIGMA;
    }
    for (r, entries) in sc.rows.iter().enumerate() {
        for &(a, va) in entries {
            for &(bcol, vb) in entries {
                k[a * nv + bcol] += rho[r] * va * vb;
            }
        }
    }
    Cholesky::factor_slice(nv, &k)
}

fn project_psd(n: usize, v: &[f64]) -> Result<Vec<f64>> {
    let s = smat(&SvecVector::new(v.to_vec())?);
    let (vals, rows) = eig_rows(&s, true)?;
    if vals.last().copied().unwrap_or(0.0) >= 0.0 {
        return Ok(v.to_vec());
    }
    let clipped: Vec<f64> = vals.iter().map(|l| l.max(0.0)).collect();
    let p = spectral_sum(n, rows.as_ref().expect("vectors requested"), &clipped);
    Ok(svec(&p).into_entries())
}

fn rho_vector(sc: &Scaled, rho: f64) -> Vec<f64> {
    (0..sc.rows.len())
        .map(|r| {
            if r < sc.m_eq {
                rho * RHO_EQ_FACTOR
            } else {
                rho
            }
        })
        .collect()
}

/// Maps scaled iterates back to the original program's variables.
fn unscale(
    prog: &ConicProgram,
    sc: &Scaled,
    x: &[f64],
    y: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, Vec<SymMatrix>)> {
    let xo: Vec<f64> = x.iter().zip(&sc.col).map(|(v, d)| v * d).collect();
    let lam: Vec<f64> = (0..sc.m_eq).map(|r| y[r] * sc.row[r] / sc.cost).collect();
    let mut w = Vec::with_capacity(prog.blocks.len());
    for (range, _) in &sc.cones {
        let e = sc.row[range.start] / sc.cost;
        let v: Vec<f64> = y[range.clone()].iter().map(|v| -v * e).collect();
        w.push(smat(&SvecVector::new(v)?));
    }
    Ok((xo, lam, w))
}

pub(crate) fn solve(prog: &ConicProgram, settings: &SolverSettings) -> Result<ConicSolution> {
    let start = Instant::now();
    if !reduce_equalities(prog).is_consistent() {
        let mut sol = ConicSolution::certificate_only(prog, SolveStatus::PrimalInfeasible);
        sol.wall_time_seconds = start.elapsed().as_secs_f64();
        return Ok(sol);
    }
    let nv = prog.num_vars;
    let sc = build(prog);
    let nrows = sc.rows.len();
    let alpha = settings.over_relaxation;
    let mut rho = RHO_INIT;
    let mut rvec = rho_vector(&sc, rho);
    let mut chol = factor(&sc, nv, &rvec)?;

    let mut x = vec![0.0; nv];
    let mut s = vec![0.0; nrows];
    let mut y = vec![0.0; nrows];
    let mut last = KktResiduals {
        primal: f64::INFINITY,
        dual: f64::INFINITY,
        gap: f64::INFINITY,
    };
    let max_iters = settings.effective_max_iters();
    let mut iter = 0;
    let mut prev_x = x.clone();
    let mut prev_y = y.clone();
    let status = loop {
        if iter >= max_iters {
            break SolveStatus::MaxIters;
        }
        if let Some(t) = settings.time_limit_seconds {
            if start.elapsed().as_secs_f64() >= t {
                break SolveStatus::TimeLimit;
            }
        }
        iter += 1;

        // x̃ = (σI + ĀᵀRĀ)⁻¹ (σx − c + ĀᵀR(b̄ − s) + Āᵀy)
        let mut rhs: Vec<f64> = x
            .iter()
            .zip(&sc.c)
            .map(|(xi, ci)| SIGMA * xi - ci)
            .collect();
        let t: Vec<f64> = (0..nrows)
            .map(|r| rvec[r] * (sc.b[r] - s[r]) + y[r])
            .collect();
        at_mul_acc(&sc.rows, &t, &mut rhs);
        chol.solve_in_place(&mut rhs);
        let xt = rhs;
        let axt = a_mul(&sc.rows, &xt);
        // s̃ = b̄ − Āx̃, relaxed.
        let v: Vec<f64> = (0..nrows)
            .map(|r| alpha * (sc.b[r] - axt[r]) + (1.0 - alpha) * s[r])
            .collect();
        for i in 0..nv {
            x[i] = alpha * xt[i] + (1.0 - alpha) * x[i];
        }
        let mut s_new: Vec<f64> = (0..nrows).map(|r| v[r] + y[r] / rvec[r]).collect();
        s_new[..sc.m_eq].iter_mut().for_each(|z| *z = 0.0);
        for (range, n) in &sc.cones {
            let p = project_psd(*n, &s_new[range.clone()])?;
            s_new[range.clone()].copy_from_slice(&p);
        }
        for r in 0..nrows {
            y[r] += rvec[r] * (v[r] - s_new[r]);
        }
        s = s_new;

        if iter % CHECK_EVERY == 0 {
            let (xo, lam, w) = unscale(prog, &sc, &x, &y)?;
            last = kkt_residuals(prog, &xo, &lam, &w)?;
            if last.within(settings.eps_primal, settings.eps_dual, settings.eps_gap) {
                break SolveStatus::Optimal;
            }
            // Certificates from successive differences.
            let dy: Vec<f64> = y.iter().zip(&prev_y).map(|(a, b)| a - b).collect();
            let dx: Vec<f64> = x.iter().zip(&prev_x).map(|(a, b)| a - b).collect();
            let ndy = max_abs(&dy);
            if ndy > 0.0 {
                let mut aty = vec![0.0; nv];
                at_mul_acc(&sc.rows, &dy, &mut aty);
                if max_abs(&aty) <= INFEASIBILITY_TOL * ndy
                    && dot(&sc.b, &dy) < -INFEASIBILITY_TOL * ndy
                {
                    break SolveStatus::PrimalInfeasible;
                }
            }
            let ndx = max_abs(&dx);
            if ndx > 0.0 && dot(&sc.c, &dx) < -INFEASIBILITY_TOL * ndx {
                let adx = a_mul(&sc.rows, &dx);
                let eq_ok = adx[..sc.m_eq]
                    .iter()
                    .all(|v| v.abs() <= INFEASIBILITY_TOL * ndx);
                let mut cone_ok = eq_ok;
                for (range, n) in &sc.cones {
                    if !cone_ok {
                        break;
                    }
                    let neg: Vec<f64> = adx[range.clone()].iter().map(|v| -v).collect();
                    let p = project_psd(*n, &neg)?;
                    let dist = neg
                        .iter()
                        .zip(&p)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                    cone_ok = dist <= INFEASIBILITY_TOL * ndx;
                }
                if cone_ok {
                    break SolveStatus::DualInfeasible;
                }
            }
            prev_x.clone_from(&x);
            prev_y.clone_from(&y);
        }

        if settings.adaptive_penalty && iter % ADAPT_EVERY == 0 {
            let ax = a_mul(&sc.rows, &x);
            let rp: Vec<f64> = (0..nrows).map(|r| ax[r] + s[r] - sc.b[r]).collect();
            let mut aty = vec![0.0; nv];
            at_mul_acc(&sc.rows, &y, &mut aty);
            let rd: Vec<f64> = (0..nv).map(|i| sc.c[i] - aty[i]).collect();
            let pscale = max_abs(&ax).max(max_abs(&s)).max(max_abs(&sc.b)).max(1e-12);
            let dscale = max_abs(&aty).max(max_abs(&sc.c)).max(1e-12);
            let ratio = (max_abs(&rp) / pscale) / (max_abs(&rd) / dscale).max(1e-300);
            let factor_new = ratio.sqrt();
            if (factor_new > 5.0 || factor_new < 0.2) && factor_new.is_finite() {
                rho = (rho * factor_new).clamp(1e-6, 1e6);
                rvec = rho_vector(&sc, rho);
                chol = factor(&sc, nv, &rvec)?;
            }
        }
    };

    let (xo, eq_duals, dual_blocks) = unscale(prog, &sc, &x, &y)?;
    if status != SolveStatus::Optimal
        && status != SolveStatus::PrimalInfeasible
        && status != SolveStatus::DualInfeasible
    {
        last = kkt_residuals(prog, &xo, &eq_duals, &dual_blocks)?;
    }
    let primal_blocks = prog.blocks.iter().map(|b| b.value(&xo)).collect();
    let primal_objective = prog.objective_value(&xo);
    let dual_objective = dual_objective(prog, &eq_duals, &dual_blocks);
    Ok(ConicSolution {
        status,
        x: xo,
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
