use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A fractional power or logarithm was requested outside its cone.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("sampling exhausted: accepted {accepted} of {requested} after {draws} draws (rate {rate:.3e})")]
    SamplingExhausted {
        requested: usize,
        accepted: usize,
        draws: u64,
        rate: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Admissibility violated at a grid point.
    #[error("cone violation at grid point {index:?} (x = {position:?})")]
    Cone {
        index: Vec<usize>,
        position: Vec<f64>,
    },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e}): {reason}")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        reason: String,
        /// `(residual, step)` of every accepted iterate before the failure.
        trace: Vec<(f64, f64)>,
    },

    #[error("linear solver failed: relative residual {relative:.3e} after {iterations} iterations")]
    LinearSolver { relative: f64, iterations: usize },

    /// The right-hand side evaluated to a non-positive or non-finite value.
    #[error("invalid instance: {0}")]
    Instance(String),

    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },

    #[error("evaluation error in `{expr}`: {message}")]
    Eval { expr: String, message: String },

    #[error("config error (line {line}): {message}")]
    Config { line: usize, message: String },

    #[error("field file error: {0}")]
    FieldFormat(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
