use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("weights do not sum to one (sum = {sum})")]
    Normalization { sum: f64 },

    #[error("invalid density vector: {0}")]
    InvalidDensity(String),

    #[error("loss {value} at round {round}, expert {expert} is outside [0, 1]")]
    LossOutOfRange {
        round: usize,
        expert: usize,
        value: f64,
    },

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("could not bracket the root: {0}")]
    Bracket(String),

    #[error("no convergence after {iterations} iterations (best estimate {estimate}, residual {residual:e})")]
    NotConverged {
        iterations: usize,
        estimate: f64,
        residual: f64,
    },

    #[error("absolute continuity violated at expert {0}: q > 0 where the prior has no mass")]
    AbsoluteContinuity(usize),

    #[error("index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("predict must be called before update in round {0}")]
    UpdateBeforePredict(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("csv error at row {row}, column {column}: {message}")]
    Csv {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
