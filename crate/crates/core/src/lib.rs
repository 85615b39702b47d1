//! Numerical laboratory for the degenerate diffusion operator
//! `P u = −(x^α u′)′` on `(0, 1)`, `0 < α < 2`.
//!
//! The crate builds the spectral decomposition of `P`, measures spectral
//! (observability) constants from windowed Gram matrices, synthesizes impulse
//! and distributed null controls by duality, runs a finite-time stabilizing
//! impulse feedback, and checks the weighted inequalities and
//! integration-by-parts identities behind the observability estimate.

// `!(x > 0.0)` is used on purpose so NaN lands on the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bessel;
pub mod carleman;
pub mod cli;
pub mod error;
pub mod hum;
pub mod io;
pub mod linalg;
pub mod null_control;
pub mod observability;
pub mod quadrature;
pub mod semigroup;
pub mod spectral;
pub mod stabilizer;
pub mod window;

pub use error::{LabError, Result};
