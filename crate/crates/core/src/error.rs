use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("value {value} outside open bounds ({lower}, {upper})")]
    OutOfBounds { value: f64, lower: i64, upper: i64 },
    #[error("invalid bounds: lower {lower} must be below upper {upper}")]
    InvalidBounds { lower: i64, upper: i64 },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("ciphertext is already quantized")]
    AlreadyQuantized,
    #[error("non-finite value in solver input")]
    NonFinite,
    #[error("singular active set at atom {atom}")]
    Singular { atom: usize },
    #[error("reference signal has zero norm")]
    ZeroReference,
    #[error("malformed ciphertext encoding: {0}")]
    Decode(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
