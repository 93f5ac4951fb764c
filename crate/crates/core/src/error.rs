use alloc::string::String;
use thiserror::Error;

/// Errors reported by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite entry at index {0}")]
    NonFinite(usize),

    #[error("matrix is singular")]
    Singular,

    #[error("operator is not unitary (residual {0:.3e})")]
    NotUnitary(f64),

    #[error("not a density matrix: {0}")]
    NotDensity(String),

    #[error("vectors {i} and {j} are not obtuse: <v_i, v_j> = {re:.6e} + {im:.6e}i")]
    NotObtuse { i: usize, j: usize, re: f64, im: f64 },

    #[error("invalid probabilities: {0}")]
    InvalidProbabilities(String),

    #[error("index {index} out of range 0..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("basis is not orthonormal (residual {0:.3e})")]
    NotOrthonormal(f64),

    #[error("reference-state overlap vanishes for branch {0}; choose different e0 or reorder basis")]
    VanishingOverlap(usize),

    #[error("internal consistency failure: {0}")]
    Consistency(String),

    #[error("dimension budget exceeded: {needed} > {budget}")]
    Budget { needed: usize, budget: usize },

    #[error("driver synthesis not supported for this M; supply DriverSpec manually")]
    DriverSynthesis,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = core::result::Result<T, Error>;
