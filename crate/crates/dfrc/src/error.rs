use thiserror::Error;

pub type Result<T> = std::result::Result<T, DfrcError>;

#[derive(Debug, Error)]
pub enum DfrcError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("scenario validation failed at `{path}`: {message}")]
    Validation { path: String, message: String },

    #[error("conic solve failed: {0}")]
    Solver(String),

    #[error("design infeasible: {0}")]
    Infeasible(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl DfrcError {
    pub fn domain(msg: impl Into<String>) -> Self {
        DfrcError::Domain(msg.into())
    }
}
