use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter for {family}: {message}")]
    InvalidParameter { family: String, message: String },

    #[error("unknown family `{0}`")]
    UnknownFamily(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("quadrature did not reach tolerance: estimate {value:e}, error {error:e} after {subdivisions} subdivisions")]
    Quadrature {
        value: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error("no convergence: {0}")]
    Convergence(String),

    #[error("near-singular configuration: {0}")]
    NearSingular(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("moment of order {order} diverges for {family}")]
    DivergentMoment { family: String, order: u32 },

    #[error("invalid initial value: {0}")]
    InvalidInit(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(family: &str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            family: family.to_string(),
            message: message.into(),
        }
    }
}
