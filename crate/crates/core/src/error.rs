use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid block spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("deformation parameter q = {0} outside the open interval (-1, 1)")]
    InvalidDeformation(f64),

    #[error("degree {degree} exceeds truncation {max}")]
    DegreeOverflow { degree: usize, max: usize },

    #[error("map is not a contraction for the deformed metrics (norm {norm})")]
    NotContraction { norm: f64 },

    #[error("map does not commute with the conjugations (residual {residual})")]
    NotRealStructure { residual: f64 },

    #[error("malformed partition: {0}")]
    MalformedPartition(String),

    #[error("subspace is not compatible with the deformed structure: {0}")]
    NotInvariantSubspace(String),

    #[error("inconsistent majorisation data: A - B T has norm {0}")]
    InconsistentMajorisation(f64),

    #[error("expected an element of length {expected}, found length {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
