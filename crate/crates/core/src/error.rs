use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = KlrfError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum KlrfError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {what} (expected {expected}, found {found})")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("dataset is not trainable:\n  {}", .0.join("\n  "))]
    InvalidDataset(Vec<String>),

    #[error("need at least two classes to train, found {0}")]
    SingleClass(usize),

    #[error("sequence {id} has no appearance source; supply appearance_frames or depth_frames")]
    MissingAppearance { id: String },

    #[error("sequence {id} has no kinematic-layout vector")]
    MissingKinematics { id: String },

    #[error("unknown class name '{name}' in {context}")]
    UnknownClass { name: String, context: String },

    #[error("parse error in {path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    DatasetFormat { path: PathBuf, message: String },

    #[error("not a model file (bad magic bytes)")]
    BadMagic,

    #[error("model format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("model checksum failure: {0}")]
    Checksum(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("serialization error: {0}")]
    Serialization(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl KlrfError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        KlrfError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Coarse classes of failure, used for process exit statuses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Internal,
}

impl KlrfError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            KlrfError::Config(_) => ErrorCategory::Config,
            KlrfError::Invariant(_) | KlrfError::Serialization(_) => ErrorCategory::Internal,
            _ => ErrorCategory::Data,
        }
    }
}
