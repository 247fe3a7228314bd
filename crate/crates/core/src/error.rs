use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the library and the runner.
#[derive(Debug, Error)]
pub enum Error {
    /// A value fell outside the domain of the function it was passed to.
    #[error("domain error: {0}")]
    Domain(String),

    /// Shapes or sizes of inputs disagree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A constructor or config received an invalid parameter.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Configuration schema violation, reported with the offending field path.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    /// A gradient or loss became non-finite during optimisation.
    #[error("non-finite value at epoch {epoch}: {what}")]
    NonFinite {
        epoch: usize,
        what: String,
        /// Network parameters at the time of failure, serialized as JSON.
        state_dump: String,
    },

    /// Numerical procedure did not converge to the requested accuracy.
    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error("unknown identifier `{0}`")]
    Unknown(String),

    #[error("missing artifact {0}")]
    MissingArtifact(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
