use thiserror::Error;

/// Errors raised by codebook construction, transceiver setup, analysis and simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A configuration field failed validation; `field` is its path.
    #[error("invalid `{field}`: {reason}")]
    InvalidField { field: String, reason: String },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("malformed codebook file: {0}")]
    MalformedCodebook(String),

    #[error("non-uniform sequence energies: min {min}, max {max}")]
    NonUniformEnergy { min: f64, max: f64 },

    #[error("quadrature did not converge: estimate {estimate}, error {error} after {intervals} intervals")]
    QuadratureNonConvergence {
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    #[error("hypothesis space of {pairs} pairs exceeds the cap of {cap}")]
    HypothesisCap { pairs: u128, cap: u128 },

    #[error("BER level {level} is not bracketed by the curve")]
    LevelNotBracketed { level: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn invalid_field(field: &str, reason: impl Into<String>) -> Error {
    Error::InvalidField {
        field: field.to_string(),
        reason: reason.into(),
    }
}
