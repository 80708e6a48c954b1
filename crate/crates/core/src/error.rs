use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid operator request: {0}")]
    Operator(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid material: {0}")]
    Material(String),

    #[error("interpolation infeasible: {0}")]
    Interpolation(String),

    #[error("invalid penalty configuration: {0}")]
    Penalty(String),

    #[error("numerical instability: non-finite field detected at step {step}")]
    Instability { step: u64 },

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("output error: {0}")]
    Output(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
