use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameter. `field` is a dotted path such as `source.kernel_radius`.
    #[error("invalid configuration at `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("position {position:?} lies outside the domain")]
    OutOfBounds { position: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("numerical instability at step {step} (t = {time:.6e} s)")]
    Instability { step: u64, time: f64 },

    #[error("record {index} (seed {seed:#018x}) failed: {source}")]
    Record {
        index: u64,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed array file at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    #[error("checksum mismatch for {}", path.display())]
    Integrity { path: PathBuf },

    #[error("model error: {0}")]
    Model(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// True for errors caused by invalid inputs rather than runtime failures.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config { .. } | Error::OutOfBounds { .. } | Error::Dimension { .. } => true,
            Error::Record { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
