use thiserror::Error;

/// Errors raised by lattice operations, reducers and the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("degenerate basis: Gram-Schmidt norm of column {index} is {ratio:.3e} times its length")]
    DegenerateBasis { index: usize, ratio: f64 },

    #[error("near-singular Gram matrix (condition estimate {condition:.3e})")]
    NearSingular { condition: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("lattice rank {rank} exceeds the enumeration cap {cap}")]
    EnumerationCap { rank: usize, cap: usize },

    #[error("non-finite value in input")]
    NonFinite,

    #[error("zero column at index {0}")]
    ZeroColumn(usize),

    #[error("integer overflow while updating the unimodular transform")]
    Overflow,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl LatticeError {
    /// True for failures caused by bad input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            LatticeError::DimensionMismatch { .. }
                | LatticeError::EnumerationCap { .. }
                | LatticeError::InvalidParameter(_)
                | LatticeError::Parse(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, LatticeError>;
