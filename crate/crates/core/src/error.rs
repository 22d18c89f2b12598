use thiserror::Error;

use crate::complex::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid simplicial complex: {0}")]
    InvalidComplex(ValidationReport),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("weights must be positive (index {index} has {value})")]
    NonPositiveWeight { index: usize, value: f64 },

    #[error("degenerate triangles with vanishing circulation energy: {triangles:?}")]
    DegenerateCoefficients { triangles: Vec<usize> },

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("parse error in {field} at line {line}, column {column}: {message}")]
    Parse {
        field: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dims(what: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            what: what.into(),
            expected,
            found,
        }
    }

    /// Short machine-readable tag, used by the CLI's error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidComplex(_) => "invalid_complex",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NonPositiveWeight { .. } => "non_positive_weight",
            Error::DegenerateCoefficients { .. } => "degenerate_coefficients",
            Error::ZeroVector => "zero_vector",
            Error::Generation(_) => "generation",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }
}
