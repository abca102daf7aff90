//! Radial discretization: geometric grids, annotated profiles, and dense
//! quadrature operators for the Riesz potential and the Green operator.

mod fd;
mod grid;
pub mod io;
mod operator;
mod profile;

use thiserror::Error;

use crate::kernels::KernelError;

pub use fd::{radial_operator_fd, FdOrder};
pub use grid::{build_grid, RadialGrid};
pub use operator::{assemble, OperatorKind, OperatorMatrix};
pub use profile::{RadialProfile, TailModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RadialError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("profile has {got} values but the grid has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },
    #[error("profile value {value} at node {index} is not a nonnegative finite number")]
    InvalidValue { index: usize, value: f64 },
    #[error("invalid annotation: {0}")]
    InvalidAnnotation(String),
    #[error("profile and operator live on different grids")]
    GridMismatch,
    #[error("origin cell is not integrable: s^(N-1-sigma) with sigma = {sigma} >= N = {n}")]
    NonIntegrableOrigin { sigma: f64, n: u32 },
    #[error("Riesz tail is not integrable: power {power} <= alpha = {alpha}")]
    NonIntegrableTail { power: f64, alpha: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}
