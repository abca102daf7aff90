//! Radial numerical tools for the Choquard equation with a point source,
//!
//! ```text
//! -Δu + u = I_alpha[u^p] u^q + k δ_0   in R^N,
//! ```
//!
//! where `I_alpha` is the Riesz potential `|x|^{alpha-N} *`.

// `!(x > 0.0)` is the idiom used to reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cli;
pub mod config;
pub mod exponents;
pub mod kernels;
pub mod quadrature;
pub mod radial;
pub mod rational;
pub mod report;
pub mod solver;
pub mod special;
pub mod verify;
