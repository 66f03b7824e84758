//! Error type shared by every stage of the pipeline.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to decode image {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("image {path} is {width}x{height} after preprocessing; both sides must be >= 16")]
    TooSmall {
        path: PathBuf,
        width: u32,
        height: u32,
    },

    #[error("no decodable images found under {dir}")]
    EmptyClass { dir: PathBuf },

    #[error("need at least {required} patches to learn a {dim}-dim filter bank, got {got}")]
    InsufficientPatches {
        required: usize,
        got: usize,
        dim: usize,
    },

    #[error("channel index {k} out of range for a bank of {dim} kernels")]
    IndexOutOfRange { k: usize, dim: usize },

    #[error("training labels contain a single class")]
    SingleClass,

    #[error("feature matrix contains a non-finite value")]
    NonFinite,

    #[error("feature vector has length {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("scored set has no positive labels")]
    NoPositives,

    #[error("scored set is empty")]
    EmptySet,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("model file error: {0}")]
    Format(String),

    #[error("unsupported model version {0} (expected 1)")]
    UnsupportedVersion(u32),

    #[error("model invariant violated: {0}")]
    InvariantViolation(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
