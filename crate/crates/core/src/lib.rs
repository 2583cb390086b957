//! Semidefinite lower bounds for quadratic optimization over the Stiefel
//! manifold `St(n,p) = {U ∈ R^{n×p} : UᵀU = I_p}`.
//!
//! The crate compiles an instance of
//!
//! ```text
//! minimize  uᵀHu + 2gᵀu   subject to  u = vec(U), U ∈ St(n,p)
//! ```
//!
//! into the Shor, DiagSum, Kron and Hadamard semidefinite relaxations, solves
//! them with an embedded conic solver, rounds relaxation solutions to feasible
//! points and polishes them with Riemannian gradient descent.

pub mod bench;
pub mod error;
pub mod instances;
pub mod linalg;
pub mod oracles;
pub mod relax;
pub mod round;
pub mod solver;

pub use error::{Error, Result};
