//! Reformulation for programs with an "anchor" block.
//!
//! When one block maps the variables one-to-one onto its upper triangle
//! (`Z_0(x)` has exactly one variable per entry, every variable appears in
//! it once, and no constant), the program is a standard-form SDP in disguise:
//!
//! ```text
//! minimize  Σ_k C_k • X_k
//! subject to  𝒜(X) = b      (original equalities, written on X_0)
//!             X_k(r,c) − Σ_e w_e x_{v_e} = F_k0(r,c)   for k ≥ 1
//!             X_k ⪰ 0
//! ```
//!
//! whose dual `max bᵀy s.t. C − 𝒜ᵀy ⪰ 0` is again a program of the
//! supported form, with one variable per equality. Its Schur matrix has the
//! size of the equality count instead of the variable count, which is far
//! smaller for the Shor, DiagSum and Hadamard relaxations.

use super::program::{BlockLabel, ConicProgram, PsdBlock};
use crate::linalg::SymMatrix;

pub(crate) struct Dualized {
    pub prog: ConicProgram,
    anchor: usize,
    /// Position `(row, col, weight)` of each original variable in the anchor.
    position: Vec<(usize, usize, f64)>,
    /// Kept original equality rows, in the order of the first dual variables.
    rows: Vec<usize>,
}

fn find_anchor(prog: &ConicProgram) -> Option<(usize, Vec<(usize, usize, f64)>)> {
    let nv = prog.num_vars;
    'blocks: for (k, b) in prog.blocks.iter().enumerate() {
        if !b.constant.is_empty() || b.entries.len() != nv || nv != b.svec_dim() {
            continue;
        }
        let mut position = vec![(usize::MAX, 0, 0.0); nv];
        let mut covered = vec![false; b.svec_dim()];
        for e in &b.entries {
            let v = e.var as usize;
            let (r, c) = (e.row as usize, e.col as usize);
            let slot = c * (c + 1) / 2 + r;
            if position[v].0 != usize::MAX || covered[slot] || e.weight == 0.0 {
                continue 'blocks;
            }
            covered[slot] = true;
            position[v] = (r, c, e.weight);
        }
        return Some((k, position));
    }
    None
}

/// Weight of the trace-form matrix `E'` with `E' • X = X(r, c)`.
fn half(r: usize, c: usize) -> f64 {
    if r == c {
        1.0
    } else {
        0.5
    }
}

pub(crate) fn dualize(prog: &ConicProgram, kept_rows: &[usize]) -> Option<Dualized> {
    let (anchor, position) = find_anchor(prog)?;
    let mut blocks: Vec<PsdBlock> = prog
        .blocks
        .iter()
        .map(|b| PsdBlock::new(BlockLabel::Other, b.order))
        .collect();
    let mut objective = Vec::new();

    // C_0 = Σ_v (c_v / w_v) E'(r_v, c_v)
    for (v, &(r, c, w)) in position.iter().enumerate() {
        let val = prog.objective[v] / w;
        if val != 0.0 {
            blocks[anchor].push_const(r, c, val * half(r, c));
        }
    }
    let mut y = 0;
    for &ri in kept_rows {
        let row = &prog.equalities[ri];
        for &(v, a) in &row.coeffs {
            let (r, c, w) = position[v as usize];
            blocks[anchor].push(r, c, y, -a / w * half(r, c));
        }
        objective.push(-row.rhs);
        y += 1;
    }
    for (k, b) in prog.blocks.iter().enumerate() {
        if k == anchor {
            continue;
        }
        let f0 = b.constant_matrix();
        let mut by_slot: std::collections::BTreeMap<(u32, u32), Vec<(usize, f64)>> =
            std::collections::BTreeMap::new();
        for e in &b.entries {
            by_slot
                .entry((e.row, e.col))
                .or_default()
                .push((e.var as usize, e.weight));
        }
        for r in 0..b.order {
            for c in r..b.order {
                blocks[k].push(r, c, y, -half(r, c));
                if let Some(list) = by_slot.get(&(r as u32, c as u32)) {
                    for &(v, w) in list {
                        let (ra, ca, wa) = position[v];
                        blocks[anchor].push(ra, ca, y, w / wa * half(ra, ca));
                    }
                }
                objective.push(-f0.get(r, c));
                y += 1;
            }
        }
    }
    let mut dual = ConicProgram::new(y);
    dual.objective = objective;
    dual.blocks = blocks;
    Some(Dualized {
        prog: dual,
        anchor,
        position,
        rows: kept_rows.to_vec(),
    })
}

impl Dualized {
    /// Original variables from the anchor block of the dual's cone
    /// multipliers.
    pub fn primal_x(&self, dual_blocks: &[SymMatrix]) -> Vec<f64> {
        let x0 = &dual_blocks[self.anchor];
        self.position
            .iter()
            .map(|&(r, c, w)| x0.get(r, c) / w)
            .collect()
    }

    /// Equality multipliers in the original row numbering.
    pub fn eq_duals(&self, y: &[f64], total_rows: usize) -> Vec<f64> {
        let mut out = vec![0.0; total_rows];
        for (i, &r) in self.rows.iter().enumerate() {
            out[r] = y[i];
        }
        out
    }
}
