use thiserror::Error;

/// Crate-wide error type. The variants correspond to the failure classes
/// surfaced by the CLI exit codes (configuration, domain, numerics, io).
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or preconditions (bad grid bounds, unknown
    /// check id, incompatible variant, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A value or index fell outside the region where an operation is
    /// defined (off-grid symmetry image, region touching a boundary, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A claimed local symmetry does not hold on the grid.
    #[error("symmetry violation for map {map}: max deviation {deviation:.3e}")]
    SymmetryViolation { map: String, deviation: f64 },

    /// A solver or decomposition failed to converge or broke down.
    #[error("numerical failure: {0}")]
    Numerics(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
