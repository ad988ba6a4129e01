use thiserror::Error;

/// Errors produced by the design, network, simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A requested sample window does not fit the available data.
    #[error("range error: {0}")]
    Range(String),

    /// The analysis window is not an integer number of fundamental periods.
    #[error("window error: {0}")]
    Window(String),

    /// Inconsistent run configuration (for example a time step that does not
    /// divide the fundamental period).
    #[error("configuration error: {0}")]
    Config(String),

    /// A field of an input document failed validation.
    #[error("invalid value at `{path}`: {reason}")]
    Validation { path: String, reason: String },

    /// The circuit matrix could not be factored.
    #[error("solver error at step {step}: {reason}")]
    Solver { step: usize, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
