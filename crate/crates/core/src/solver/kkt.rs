//! Solver-independent optimality measures.

use serde::Serialize;

use super::program::ConicProgram;
use crate::error::{Error, Result};
use crate::linalg::{max_abs, SymMatrix};

/// Scaled KKT residuals of a primal-dual candidate.
///
/// * `primal`: worst equality residual over `1 + ‖b‖∞`, or worst negative
///   eigenvalue of a block `Z_k(x)` over `1 + max_k ‖F_k0‖_max`.
/// * `dual`: `‖c − Aᵀλ − Σ 𝒜_k*(W_k)‖∞` or worst negative eigenvalue of a
///   `W_k`, over `1 + ‖c‖∞`.
/// * `gap`: `|cᵀx − (bᵀλ − Σ F_k0 • W_k)| / (1 + |cᵀx| + |bᵀλ − Σ F_k0 • W_k|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktResiduals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

impl KktResiduals {
    pub fn within(&self, eps_primal: f64, eps_dual: f64, eps_gap: f64) -> bool {
        self.primal <= eps_primal && self.dual <= eps_dual && self.gap <= eps_gap
    }

    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

pub(crate) fn dual_objective(prog: &ConicProgram, eq_duals: &[f64], w: &[SymMatrix]) -> f64 {
    let lin: f64 = prog
        .equalities
        .iter()
        .zip(eq_duals)
        .map(|(row, l)| row.rhs * l)
        .sum();
    let cone: f64 = prog
        .blocks
        .iter()
        .zip(w)
        .map(|(b, wk)| b.constant_inner(wk))
        .sum();
    lin - cone
}

pub(crate) fn relative_gap(pobj: f64, dobj: f64) -> f64 {
    (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs())
}

/// Recomputes residuals from scratch, including eigenvalue checks of every
/// primal and dual block. Depends only on the program data and the candidate.
pub fn kkt_residuals(
    prog: &ConicProgram,
    x: &[f64],
    eq_duals: &[f64],
    dual_blocks: &[SymMatrix],
) -> Result<KktResiduals> {
    if x.len() != prog.num_vars
        || eq_duals.len() != prog.equalities.len()
        || dual_blocks.len() != prog.blocks.len()
        || dual_blocks
            .iter()
            .zip(&prog.blocks)
            .any(|(w, b)| w.order() != b.order)
    {
        return Err(Error::Dimension(
            "candidate does not match the program's dimensions".into(),
        ));
    }
    let b_scale = 1.0
        + prog
            .equalities
            .iter()
            .fold(0.0f64, |m, r| m.max(r.rhs.abs()));
    let f0_scale = 1.0
        + prog
            .blocks
            .iter()
            .flat_map(|b| b.constant.iter())
            .fold(0.0f64, |m, e| m.max(e.value.abs()));
    let c_scale = 1.0 + max_abs(&prog.objective);

    let mut primal = 0.0f64;
    for row in &prog.equalities {
        primal = primal.max((row.eval(x) - row.rhs).abs() / b_scale);
    }
    for block in &prog.blocks {
        let lmin = block.value(x).min_eigenvalue()?;
        primal = primal.max((-lmin).max(0.0) / f0_scale);
    }

    let mut rd = prog.objective.clone();
    for (row, l) in prog.equalities.iter().zip(eq_duals) {
        for &(v, a) in &row.coeffs {
            rd[v as usize] -= a * l;
        }
    }
    for (block, w) in prog.blocks.iter().zip(dual_blocks) {
        block.adjoint_acc(w, -1.0, &mut rd);
    }
    let mut dual = max_abs(&rd) / c_scale;
    for w in dual_blocks {
        dual = dual.max((-w.min_eigenvalue()?).max(0.0) / c_scale);
    }

    let pobj = prog.objective_value(x);
    let dobj = dual_objective(prog, eq_duals, dual_blocks);
    Ok(KktResiduals {
        primal,
        dual,
        gap: relative_gap(pobj, dobj),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::program::{BlockLabel, PsdBlock};

    /// min C•X, tr X = 1, X ⪰ 0 with variables the upper triangle of X.
    fn min_eig_program(c: &[f64]) -> ConicProgram {
        let n = c.len();
        let nv = n * (n + 1) / 2;
        let mut prog = ConicProgram::new(nv);
        let mut block = PsdBlock::new(BlockLabel::Other, n);
        let mut var = 0;
        let mut trace = Vec::new();
        for j in 0..n {
            for i in 0..=j {
                block.push(i, j, var, 1.0);
                if i == j {
                    prog.objective[var] = c[i];
                    trace.push((var, 1.0));
                }
                var += 1;
            }
        }
        prog.add_equality(trace, 1.0);
        prog.blocks.push(block);
        prog
    }

    fn analytic() -> (ConicProgram, Vec<f64>, Vec<f64>, Vec<SymMatrix>) {
        let prog = min_eig_program(&[2.0, -1.0, 3.0]);
        // X = e2 e2ᵀ: variable (1,1) has svec-style index 2.
        let mut x = vec![0.0; 6];
        x[2] = 1.0;
        // λ = −1, W = C − λI = diag(3, 0, 4).
        let w = SymMatrix::from_diag(&[3.0, 0.0, 4.0]);
        (prog, x, vec![-1.0], vec![w])
    }

    #[test]
    fn analytic_solution_has_zero_residuals() {
        let (prog, x, l, w) = analytic();
        let r = kkt_residuals(&prog, &x, &l, &w).unwrap();
        assert!(r.max() <= 1e-12, "{r:?}");
    }

    #[test]
    fn perturbation_scales_primal_residual() {
        let (prog, x, l, w) = analytic();
        let mut ratios = Vec::new();
        for delta in [1e-3, 1e-4, 1e-5] {
            let mut xp = x.clone();
            xp[0] += delta;
            let r = kkt_residuals(&prog, &xp, &l, &w).unwrap();
            ratios.push(r.primal / delta);
        }
        for q in &ratios {
            assert!(*q > 0.1 && *q < 10.0, "{ratios:?}");
        }
    }

    #[test]
    fn empty_program_is_trivially_optimal() {
        let prog = ConicProgram::new(3);
        let r = kkt_residuals(&prog, &[0.0; 3], &[], &[]).unwrap();
        assert_eq!(
            r,
            KktResiduals {
                primal: 0.0,
                dual: 0.0,
                gap: 0.0
            }
        );
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let (prog, _, l, w) = analytic();
        assert!(kkt_residuals(&prog, &[0.0; 2], &l, &w).is_err());
    }
}
