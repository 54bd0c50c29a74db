use thiserror::Error;

/// Errors produced by the estimation, simulation and I/O pipelines.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (window sizes, scale counts, family parameters).
    #[error("configuration error: {0}")]
    Config(String),

    /// Invalid input data (shape, values, parse failures).
    #[error("input error: {0}")]
    Input(String),

    /// Dense linear algebra failure (singular or ill-conditioned matrix).
    #[error("linear algebra error: {0}")]
    LinAlg(String),

    /// Index outside the valid scale/time/replicate range.
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
