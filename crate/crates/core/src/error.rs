use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("parameter out of domain: {0}")]
    Domain(String),

    /// An iterative kernel hit its iteration cap before reaching tolerance.
    #[error("numerical kernel did not converge: {0}")]
    Numerics(String),

    #[error("unsupported noise generator `{0}`")]
    UnsupportedGenerator(String),

    #[error("no closed-form smoothing oracle for {0}")]
    UnsupportedOracle(String),

    /// The external classifier failed or violated the wire protocol.
    #[error("classifier transport error: {0}")]
    Transport(String),

    /// A cache record cannot be used for the requested recertification.
    #[error("cache incompatible: {0}")]
    CacheIncompatible(String),

    #[error("cache validation failed: {0}")]
    CacheValidation(String),

    #[error("corrupt cache file: {0}")]
    CacheCorrupt(String),

    #[error("unsupported cache format version {found} (expected {expected})")]
    UnsupportedVersion { found: u16, expected: u16 },

    #[error("planning failed: {0}")]
    Planning(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
