//! Scaled symmetric vectorization.
//!
//! `svec` lists the upper triangle column by column (`(0,0), (0,1), (1,1),
//! (0,2), …`) with off-diagonal entries multiplied by √2, so that
//! `svec(S)·svec(T) = S • T`.

use std::f64::consts::SQRT_2;

use super::{dot, SymMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SvecVector {
    order: usize,
    entries: Vec<f64>,
}

impl SvecVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        let order = svec_order(entries.len())?;
        Ok(Self { order, entries })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }

    pub fn dot(&self, other: &SvecVector) -> f64 {
        dot(&self.entries, &other.entries)
    }
}

/// `n(n+1)/2`.
pub fn svec_len(order: usize) -> usize {
    order * (order + 1) / 2
}

/// Inverse of [`svec_len`]; fails when `len` is not a triangular number.
pub fn svec_order(len: usize) -> Result<usize> {
    let n = ((((8 * len + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
    if svec_len(n) != len {
        return Err(Error::Dimension(format!(
            "length {len} is not a triangular number"
        )));
    }
    Ok(n)
}

/// Position of entry (i, j), `i <= j`, in the svec layout.
#[inline]
pub(crate) fn svec_index(i: usize, j: usize) -> usize {
    debug_assert!(i <= j);
    j * (j + 1) / 2 + i
}

pub fn svec(s: &SymMatrix) -> SvecVector {
    let n = s.order();
    let mut entries = Vec::with_capacity(svec_len(n));
    for j in 0..n {
        for i in 0..=j {
            let v = s.get(i, j);
            entries.push(if i == j { v } else { SQRT_2 * v });
        }
    }
    SvecVector { order: n, entries }
}

pub fn smat(v: &SvecVector) -> SymMatrix {
    let n = v.order;
    let mut s = SymMatrix::zeros(n);
    for j in 0..n {
        for i in 0..=j {
            let e = v.entries[svec_index(i, j)];
            s.set(i, j, if i == j { e } else { e / SQRT_2 });
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_layout() {
        let v = svec(&SymMatrix::identity(2));
        assert_eq!(v.entries(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn off_diagonal_norm_matches_trace_inner_product() {
        let mut s = SymMatrix::zeros(2);
        s.set(0, 1, 1.0);
        let v = svec(&s);
        assert!((v.dot(&v) - 2.0).abs() < 1e-15);
        assert!((s.inner(&s) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn non_triangular_length_is_rejected() {
        assert!(matches!(
            SvecVector::new(vec![0.0; 4]),
            Err(Error::Dimension(_))
        ));
        assert_eq!(svec_order(0).unwrap(), 0);
        assert_eq!(svec_order(6).unwrap(), 3);
    }

    #[test]
    fn layout_index() {
        assert_eq!(svec_index(0, 0), 0);
        assert_eq!(svec_index(0, 1), 1);
        assert_eq!(svec_index(1, 1), 2);
        assert_eq!(svec_index(0, 2), 3);
    }
}
