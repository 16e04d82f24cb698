use thiserror::Error;

/// Errors raised anywhere in the surrogate / sampling pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("training diverged at epoch {epoch}: non-finite parameters")]
    Divergence { epoch: usize },

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("inverse crime: data grid resolution {0} equals the inversion grid resolution")]
    InverseCrime(usize),

    #[error("degenerate error indicator: high-fidelity output has zero max-norm")]
    DegenerateIndicator,

    #[error("refinement at outer iteration {iteration} failed: {source}")]
    Refinement {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::Shape {
            context,
            expected,
            actual,
        }
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Parse(_) | Error::InverseCrime(_) | Error::Input(_) => 2,
            Error::Divergence { .. }
            | Error::Solver(_)
            | Error::Numerical(_)
            | Error::DegenerateIndicator
            | Error::Refinement { .. }
            | Error::Shape { .. } => 3,
            Error::Io(_) => 1,
        }
    }
}
