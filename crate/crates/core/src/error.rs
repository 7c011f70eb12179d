//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid density: {0}")]
    Density(String),

    #[error("invalid discretization: {0}")]
    Discretization(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("eigensolver failed: {0}")]
    Solver(String),

    #[error("structural check failed: {0}")]
    Structural(String),

    #[error("decomposition failed: {0}")]
    Decomposition(String),

    #[error("bound not applicable: {0}")]
    Bound(String),

    #[error("invalid experiment config: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
