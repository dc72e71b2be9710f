use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative procedure exhausted its budget.
    #[error("did not converge: {what} after {iterations} iterations")]
    NonConvergence { what: String, iterations: usize },

    /// The information matrix could not be inverted.
    #[error("singular information matrix (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn no_convergence(what: impl Into<String>, iterations: usize) -> Self {
        Error::NonConvergence {
            what: what.into(),
            iterations,
        }
    }
}
