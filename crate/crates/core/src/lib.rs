//! Numerical laboratory for blow-up of weakly coupled semilinear systems of
//! generalized Tricomi equations
//!
//! ```text
//! u_tt - t^{m1} Δu = |v|^p,    v_tt - t^{m2} Δv = |u|^q,
//! ```
//!
//! covering the closed-form critical curves and lifespan exponents, the
//! Bessel-type special solutions used as test functions, and a radial
//! finite-difference solver whose measured blow-up times can be fitted
//! against the predicted lifespan scaling.

// Negated comparisons throughout are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bessel;
pub mod cli;
pub mod eigenfunctions;
pub mod error;
pub mod exponents;
pub mod quadrature;
pub mod simulator;
pub mod special;
pub mod test_solutions;
pub mod toolkit;

pub use error::{Error, Result};
