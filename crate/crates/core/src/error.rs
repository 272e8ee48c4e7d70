use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A label or argument outside the admissible set of a loss.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point with norm {norm} lies outside the declared domain bound {bound}")]
    OutsideDomain { norm: f64, bound: f64 },

    #[error("kernel {0} is unbounded without a domain bound")]
    UnboundedKernel(String),

    #[error("kernel mismatch: {0} vs {1}")]
    KernelMismatch(String, String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The loss fails the convex / uniformly Lipschitz contract.
    #[error("loss {loss} violates its contract: {detail}")]
    ContractViolation { loss: String, detail: String },

    #[error(
        "solver did not converge after {iterations} iterations \
         (certificate residual {residual:e} > tolerance {tolerance:e})"
    )]
    NonConvergence {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid value for `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("csv error at row {row}, column {column}: {message}")]
    Csv {
        row: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by malformed user input rather than by
    /// computation or I/O.
    pub fn is_configuration(&self) -> bool {
        !matches!(self, Error::NonConvergence { .. } | Error::Io(_))
    }
}
