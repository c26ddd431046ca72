//! Numerical laboratory for the sum Hessian equation
//! `σ_k(η) + α σ_{k-1}(η) = f(x, u, Du)`, where `η_i = Σ_{j≠i} λ_j(D²u)`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cones;
pub mod error;
pub mod estimates;
pub mod frontend;
pub mod solver;
pub mod spectral;
pub mod suites;
pub mod symfun;

pub use error::{Error, Result};
