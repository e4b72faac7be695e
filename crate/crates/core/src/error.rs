use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix is not Hermitian (max |h - h^†| = {0:e})")]
    NonHermitian(f64),

    #[error("matrix is not positive semi-definite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("trace is {0}, expected 1")]
    BadTrace(f64),

    #[error("matrix is not unitary (max |u u^† - I| = {0:e})")]
    NotUnitary(f64),

    #[error("{name} = {value} outside [{min}, {max}]")]
    OutOfRange { name: &'static str, value: f64, min: f64, max: f64 },

    #[error("unknown polarization label {0:?}")]
    UnknownLabel(String),

    #[error("no counts available: {0}")]
    EmptyData(&'static str),

    #[error("measurement set is not informationally complete (pivot {0:e})")]
    SingularSystem(f64),

    #[error("reconstructed state is unphysical (clamp of {0} exceeds threshold)")]
    Unphysical(f64),

    #[error("diagonal entry {0:e} too small to normalise coherence")]
    DegenerateDiagonal(f64),

    #[error("spectrum shape {0:?} is not supported")]
    UnsupportedShape(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
