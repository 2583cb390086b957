//! Equality preprocessing: drop linearly dependent rows, detect
//! inconsistent ones.

use super::program::ConicProgram;
use crate::linalg::{axpy, dot, norm2};

/// Relative size below which a row is treated as a combination of earlier
/// rows.
const DEPENDENCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedEqualities {
    /// Indices of the rows kept, in program order.
    pub kept: Vec<usize>,
    /// Largest mismatch found between a dependent row's rhs and the value
    /// implied by the rows before it (0 when consistent).
    pub inconsistency: f64,
}

impl ReducedEqualities {
    pub fn is_consistent(&self) -> bool {
        self.inconsistency == 0.0
    }
}

/// Modified Gram–Schmidt (two passes) over the equality rows in order.
pub fn reduce_equalities(prog: &ConicProgram) -> ReducedEqualities {
    let nv = prog.num_vars;
    let mut basis: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut kept = Vec::new();
    let mut inconsistency = 0.0f64;
    for (r, row) in prog.equalities.iter().enumerate() {
        let mut a = vec![0.0; nv];
        for &(v, c) in &row.coeffs {
            a[v as usize] += c;
        }
        let mut beta = row.rhs;
        let scale = norm2(&a);
        for _ in 0..2 {
            for (q, qb) in &basis {
                let t = dot(q, &a);
                axpy(-t, q, &mut a);
                beta -= t * qb;
            }
        }
        let res = norm2(&a);
        if res <= DEPENDENCE_TOL * scale.max(1e-300) || scale == 0.0 {
            let miss = beta.abs() / (1.0 + row.rhs.abs());
            if miss > 1e-9 {
                inconsistency = inconsistency.max(miss);
            }
            continue;
        }
        a.iter_mut().for_each(|v| *v /= res);
        basis.push((a, beta / res));
        kept.push(r);
    }
    ReducedEqualities {
        kept,
        inconsistency,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dependent_consistent_rows_are_dropped() {
        let mut prog = ConicProgram::new(3);
        prog.add_equality(vec![(0, 1.0), (1, 1.0)], 1.0);
        prog.add_equality(vec![(2, 1.0)], 0.5);
        prog.add_equality(vec![(0, 2.0), (1, 2.0), (2, -1.0)], 1.5);
        let red = reduce_equalities(&prog);
        assert_eq!(red.kept, vec![0, 1]);
        assert!(red.is_consistent());
    }

    #[test]
    fn contradictory_rows_are_flagged() {
        let mut prog = ConicProgram::new(2);
        prog.add_equality(vec![(0, 1.0), (1, 1.0)], 1.0);
        prog.add_equality(vec![(0, 1.0), (1, 1.0)], 2.0);
        let red = reduce_equalities(&prog);
        assert_eq!(red.kept, vec![0]);
        assert!(!red.is_consistent());
    }

    #[test]
    fn empty_row_with_nonzero_rhs_is_inconsistent() {
        let mut prog = ConicProgram::new(1);
        prog.add_equality(vec![], 1.0);
        assert!(!reduce_equalities(&prog).is_consistent());
    }
}
