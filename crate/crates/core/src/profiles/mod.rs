//! Profiles: piecewise-linear functions, piecewise-affine data, grid functions.

pub mod datum;
pub mod grid;
pub mod io;
pub mod pwl;

pub use datum::{ClassViolation, ContinuousDatum, DataClass, PiecewiseAffine};
pub use grid::{cell_average, interpolate, DiscreteProfile, GridSpec};
pub use pwl::{l1_distance, l1_distance_pieces, measures, Measures, Piece, PiecewiseLinearFn};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProfileError {
    #[error("node arrays differ in length: {xs} abscissae, {ys} values")]
    LengthMismatch { xs: usize, ys: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("abscissae not strictly increasing at index {0}")]
    NodesNotIncreasing(usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(
        "grid window [{j_min}, {j_max}] does not cover the support; need at least [{needed_min}, {needed_max}]"
    )]
    WindowTooSmall {
        needed_min: i64,
        needed_max: i64,
        j_min: i64,
        j_max: i64,
    },
}
