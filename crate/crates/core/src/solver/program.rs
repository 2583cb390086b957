//! Standard-form conic programs.
//!
//! ```text
//! minimize    cᵀx
//! subject to  A·x = b
//!             Z_k(x) = F_k0 + Σ_v x_v F_kv  ⪰ 0     for every block k
//! ```
//!
//! Each block's affine map is stored as sparse upper-triangle entries: a
//! [`BlockEntry`] `(row, col, var, weight)` with `row <= col` contributes
//! `weight·x_var` to both `(row, col)` and `(col, row)`. Constant entries use
//! the same layout without a variable. Variables not touched by any block are
//! free.

use std::collections::HashSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{svec_len, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockLabel {
    /// The lifted moment matrix `Y = [[1, uᵀ], [u, X]]`.
    Y,
    /// `I_n − Σ_j X_jj`.
    SlackDiagSum,
    /// The linearized Kronecker square `M(u, X)`.
    M,
    /// `[[I_p, mat(diag X)ᵀ], [mat(diag X), I_n]]`.
    Hadamard,
    /// Any block not produced by the relaxation builders.
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockEntry {
    pub row: u32,
    pub col: u32,
    pub var: u32,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstEntry {
    pub row: u32,
    pub col: u32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsdBlock {
    pub label: BlockLabel,
    pub order: usize,
    pub constant: Vec<ConstEntry>,
    pub entries: Vec<BlockEntry>,
}

impl PsdBlock {
    pub fn new(label: BlockLabel, order: usize) -> Self {
        Self {
            label,
            order,
            constant: Vec::new(),
            entries: Vec::new(),
        }
    }

    /// Adds `weight·x_var` at (i, j) and (j, i).
    pub fn push(&mut self, i: usize, j: usize, var: usize, weight: f64) {
        let (row, col) = if i <= j { (i, j) } else { (j, i) };
        self.entries.push(BlockEntry {
            row: row as u32,
            col: col as u32,
            var: var as u32,
            weight,
        });
    }

    pub fn push_const(&mut self, i: usize, j: usize, value: f64) {
        let (row, col) = if i <= j { (i, j) } else { (j, i) };
        self.constant.push(ConstEntry {
            row: row as u32,
            col: col as u32,
            value,
        });
    }

    pub fn constant_matrix(&self) -> SymMatrix {
        let mut z = SymMatrix::zeros(self.order);
        for e in &self.constant {
            let v = z.get(e.row as usize, e.col as usize) + e.value;
            z.set(e.row as usize, e.col as usize, v);
        }
        z
    }

    /// `Σ_v x_v F_v` without the constant term.
    pub fn linear_part(&self, x: &[f64]) -> SymMatrix {
        let mut z = SymMatrix::zeros(self.order);
        for e in &self.entries {
            let v = z.get(e.row as usize, e.col as usize) + e.weight * x[e.var as usize];
            z.set(e.row as usize, e.col as usize, v);
        }
        z
    }

    /// `F_0 + Σ_v x_v F_v`.
    pub fn value(&self, x: &[f64]) -> SymMatrix {
        let mut z = self.linear_part(x);
        for e in &self.constant {
            let v = z.get(e.row as usize, e.col as usize) + e.value;
            z.set(e.row as usize, e.col as usize, v);
        }
        z
    }

    /// Adjoint map: `out[v] += scale · (F_v • M)` for a symmetric `M`.
    pub fn adjoint_acc(&self, m: &SymMatrix, scale: f64, out: &mut [f64]) {
        for e in &self.entries {
            let (r, c) = (e.row as usize, e.col as usize);
            let f = if r == c { 1.0 } else { 2.0 };
            out[e.var as usize] += scale * e.weight * f * m.get(r, c);
        }
    }

    /// `F_0 • M`.
    pub fn constant_inner(&self, m: &SymMatrix) -> f64 {
        self.constant
            .iter()
            .map(|e| {
                let (r, c) = (e.row as usize, e.col as usize);
                let f = if r == c { 1.0 } else { 2.0 };
                f * e.value * m.get(r, c)
            })
            .sum()
    }

    pub fn svec_dim(&self) -> usize {
        svec_len(self.order)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EqualityRow {
    pub coeffs: Vec<(u32, f64)>,
    pub rhs: f64,
}

impl EqualityRow {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, a)| a * x[v as usize]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConicProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub equalities: Vec<EqualityRow>,
    pub blocks: Vec<PsdBlock>,
}

impl ConicProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            equalities: Vec::new(),
            blocks: Vec::new(),
        }
    }

    pub fn add_equality(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.equalities.push(EqualityRow {
            coeffs: coeffs.into_iter().map(|(v, a)| (v as u32, a)).collect(),
            rhs,
        });
    }

    pub fn block(&self, label: BlockLabel) -> Option<&PsdBlock> {
        self.blocks.iter().find(|b| b.label == label)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        crate::linalg::dot(&self.objective, x)
    }

    /// Rejects out-of-range indices, repeated coordinates and non-finite
    /// data before any solver work is done.
    pub fn validate(&self) -> Result<()> {
        let nv = self.num_vars;
        if self.objective.len() != nv {
            return Err(Error::Validation(format!(
                "objective has length {} for {nv} variables",
                self.objective.len()
            )));
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite objective coefficient".into()));
        }
        for (r, row) in self.equalities.iter().enumerate() {
            let mut seen = HashSet::new();
            if !row.rhs.is_finite() {
                return Err(Error::Validation(format!(
                    "equality {r} has a non-finite rhs"
                )));
            }
            for &(v, a) in &row.coeffs {
                if v as usize >= nv || !a.is_finite() {
                    return Err(Error::Validation(format!(
                        "equality {r} references variable {v} (of {nv}) with coefficient {a}"
                    )));
                }
                if !seen.insert(v) {
                    return Err(Error::Validation(format!(
                        "equality {r} lists variable {v} twice"
                    )));
                }
            }
        }
        for (k, block) in self.blocks.iter().enumerate() {
            if block.order == 0 {
                return Err(Error::Validation(format!("block {k} has order 0")));
            }
            let ord = block.order as u32;
            let mut seen = HashSet::new();
            for e in &block.entries {
                if e.row > e.col || e.col >= ord || e.var as usize >= nv || !e.weight.is_finite() {
                    return Err(Error::Validation(format!(
                        "block {k} ({:?}, order {}) has an invalid entry {e:?}",
                        block.label, block.order
                    )));
                }
                if !seen.insert((e.row, e.col, e.var)) {
                    return Err(Error::Validation(format!(
                        "block {k} repeats coordinate ({}, {}) for variable {}",
                        e.row, e.col, e.var
                    )));
                }
            }
            let mut seen = HashSet::new();
            for e in &block.constant {
                if e.row > e.col || e.col >= ord || !e.value.is_finite() {
                    return Err(Error::Validation(format!(
                        "block {k} has an invalid constant entry {e:?}"
                    )));
                }
                if !seen.insert((e.row, e.col)) {
                    return Err(Error::Validation(format!(
                        "block {k} repeats constant coordinate ({}, {})",
                        e.row, e.col
                    )));
                }
            }
        }
        Ok(())
    }

    /// Pretty JSON dump of the whole program, for inspection.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("program serializes")
    }

    /// Largest violation of any constraint at `x`: equality residuals and the
    /// negative part of the smallest eigenvalue of every block.
    pub fn constraint_violation(&self, x: &[f64]) -> Result<f64> {
        let mut worst = 0.0f64;
        for row in &self.equalities {
            worst = worst.max((row.eval(x) - row.rhs).abs());
        }
        for block in &self.blocks {
            let lmin = block.value(x).min_eigenvalue()?;
            worst = worst.max(-lmin);
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ConicProgram {
        let mut prog = ConicProgram::new(2);
        prog.objective = vec![1.0, -1.0];
        prog.add_equality(vec![(0, 1.0), (1, 1.0)], 1.0);
        let mut b = PsdBlock::new(BlockLabel::Other, 2);
        b.push(0, 0, 0, 1.0);
        b.push(1, 1, 1, 1.0);
        b.push_const(0, 1, 0.5);
        prog.blocks.push(b);
        prog
    }

    #[test]
    fn block_value_and_adjoint() {
        let prog = tiny();
        prog.validate().unwrap();
        let z = prog.blocks[0].value(&[2.0, 3.0]);
        assert_eq!(z.get(0, 0), 2.0);
        assert_eq!(z.get(1, 1), 3.0);
        assert_eq!(z.get(1, 0), 0.5);
        let mut out = vec![0.0; 2];
        prog.blocks[0].adjoint_acc(&SymMatrix::identity(2), 1.0, &mut out);
        assert_eq!(out, vec![1.0, 1.0]);
    }

    #[test]
    fn duplicate_coordinates_are_rejected() {
        let mut prog = tiny();
        prog.blocks[0].push(0, 0, 0, 2.0);
        assert!(matches!(prog.validate(), Err(Error::Validation(_))));
    }

    #[test]
    fn out_of_range_entries_are_rejected() {
        let mut prog = tiny();
        prog.blocks[0].push(0, 2, 0, 1.0);
        assert!(prog.validate().is_err());
        let mut prog = tiny();
        prog.add_equality(vec![(5, 1.0)], 0.0);
        assert!(prog.validate().is_err());
    }

    #[test]
    fn violation_reports_negative_eigenvalues() {
        let prog = tiny();
        // x = (1, 0): Z = [[1, .5], [.5, 0]] has eigenvalue (1 − √2)/2.
        let v = prog.constraint_violation(&[1.0, 0.0]).unwrap();
        assert!((v - (2f64.sqrt() - 1.0) / 2.0).abs() < 1e-12);
    }
}
