#![allow(dead_code)]

use stiefel_relax::instances::RngStream;
use stiefel_relax::linalg::{thin_qr, DenseMatrix, SymMatrix};

pub fn rng(label: &str, seed: u64) -> RngStream {
    RngStream::for_instance(label, 0, 0, seed)
}

pub fn gaussian(rng: &mut RngStream, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.normal())
}

pub fn gaussian_sym(rng: &mut RngStream, order: usize) -> SymMatrix {
    SymMatrix::from_upper_fn(order, |_, _| rng.normal())
}

/// Q factor of a Gaussian matrix.
pub fn random_stiefel(rng: &mut RngStream, n: usize, p: usize) -> DenseMatrix {
    thin_qr(&gaussian(rng, n, p)).unwrap().q
}

/// Tangent vector at `u`: a projected Gaussian direction of unit norm.
pub fn random_tangent(rng: &mut RngStream, u: &DenseMatrix) -> DenseMatrix {
    let (n, p) = u.shape();
    let z = gaussian(rng, n, p);
    let t = stiefel_relax::round::project_tangent(u, &z);
    let norm = t.frobenius();
    t.scale(1.0 / norm)
}
