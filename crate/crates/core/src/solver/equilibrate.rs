//! Ruiz equilibration of a sparse constraint matrix.

use std::ops::Range;

/// Diagonal scalings `D` (columns) and `E` (rows) with `E·Ā·D` roughly
/// unit in every row and column infinity norm. Rows inside one group share a
/// single scale so that cones stay invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibration {
    pub col: Vec<f64>,
    pub row: Vec<f64>,
}

/// `rows[r]` lists `(column, value)` pairs. `groups` partitions some rows
/// into ranges that must share one scale; rows outside every group are
/// scaled individually.
pub fn ruiz_equilibrate(
    rows: &[Vec<(usize, f64)>],
    groups: &[Range<usize>],
    ncols: usize,
    iters: usize,
) -> Equilibration {
    let nrows = rows.len();
    let mut col = vec![1.0; ncols];
    let mut row = vec![1.0; nrows];
    let mut group_of = vec![usize::MAX; nrows];
    for (g, range) in groups.iter().enumerate() {
        for r in range.clone() {
            group_of[r] = g;
        }
    }
    let guard = |v: f64| if v < 1e-4 { 1.0 } else { v.min(1e4) };
    for _ in 0..iters {
        let mut cmax = vec![0.0f64; ncols];
        let mut rmax = vec![0.0f64; nrows];
        for (r, entries) in rows.iter().enumerate() {
            for &(c, v) in entries {
                let a = (row[r] * v * col[c]).abs();
                cmax[c] = cmax[c].max(a);
                rmax[r] = rmax[r].max(a);
            }
        }
        let mut gmax = vec![0.0f64; groups.len()];
        for r in 0..nrows {
            if group_of[r] != usize::MAX {
                gmax[group_of[r]] = gmax[group_of[r]].max(rmax[r]);
            }
        }
        for (c, m) in cmax.iter().enumerate() {
            if *m > 0.0 {
                col[c] /= guard(*m).sqrt();
            }
        }
        for r in 0..nrows {
            let m = match group_of[r] {
                usize::MAX => rmax[r],
                g => gmax[g],
            };
            if m > 0.0 {
                row[r] /= guard(m).sqrt();
            }
        }
    }
    Equilibration { col, row }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn badly_scaled_rows_are_balanced() {
        let rows = vec![vec![(0, 1e3), (1, 2e3)], vec![(0, 1e-2), (1, 3e-2)]];
        let eq = ruiz_equilibrate(&rows, &[], 2, 25);
        for (r, entries) in rows.iter().enumerate() {
            let m = entries
                .iter()
                .map(|&(c, v)| (eq.row[r] * v * eq.col[c]).abs())
                .fold(0.0, f64::max);
            assert!(m > 0.3 && m < 3.0, "row {r}: {m}");
        }
    }

    #[test]
    fn grouped_rows_share_a_scale() {
        let rows = vec![vec![(0, 5.0)], vec![(1, 0.1)], vec![(0, 1.0), (1, 1.0)]];
        let eq = ruiz_equilibrate(&rows, &[0..2], 2, 10);
        assert_eq!(eq.row[0], eq.row[1]);
    }
}
