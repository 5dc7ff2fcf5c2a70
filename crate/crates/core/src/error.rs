use thiserror::Error;

/// Errors produced by geometry, projection and reconstruction routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("ray at offset u={u} misses the domain of radius {radius}")]
    RayMissesDomain { u: f64, radius: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("projection value {value} outside (0, {max}]")]
    ProjectionOutOfRange { value: f64, max: f64 },

    #[error("view angles must cover [0, 2pi) for exponential inversion")]
    IncompleteAngularCoverage,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
