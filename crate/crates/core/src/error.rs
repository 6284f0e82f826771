use thiserror::Error;

/// Errors raised by the solver, the oracle and the checkers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid size {0} must be even and at least 16")]
    InvalidGridSize(usize),

    #[error("field `{field}` has {got} samples, grid has {expected}")]
    LengthMismatch {
        field: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in `{field}` at sample {index}")]
    NonFiniteField { field: &'static str, index: usize },

    #[error("negative power of a vanishing field required: {0}")]
    NegativePower(String),

    #[error("omega dips to {min:e}, below the admissible floor {floor:e}")]
    NegativeOmega { min: f64, floor: f64 },

    #[error("{name} = {value} lies strictly between 1 and 2; the reduction at x = 0 is not defined there")]
    UnsupportedExponent { name: &'static str, value: f64 },

    #[error("no closed form or usable envelope for regime {0}")]
    NoClosedForm(String),

    #[error("omega2 grows by a factor {ratio:.3} over the trace, at least {required} is needed")]
    InsufficientGrowth { ratio: f64, required: f64 },

    #[error("degree budget exceeded: degree {degree} x power chain {chain} > n/3 with n = {n}")]
    DegreeBudgetExceeded { degree: usize, chain: usize, n: usize },

    #[error("not applicable: {0}")]
    NotApplicable(&'static str),

    #[error("config error: {0}")]
    Config(String),

    #[error("csv error: {0}")]
    Csv(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, err: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }
}
