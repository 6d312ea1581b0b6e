use std::path::PathBuf;

use thiserror::Error;

use crate::simcore::TrunkState;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("simulation diverged: non-finite trunk state or input")]
    NonFinite { snapshot: Box<TrunkState> },
    #[error("foot target out of reach for leg {leg}")]
    OutOfReach { leg: usize },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("failed to parse configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("failed to serialize configuration: {0}")]
    Serialize(#[from] toml::ser::Error),
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("checkpoint truncated while reading {0}")]
    Truncated(&'static str),
    #[error("checkpoint has {0} trailing bytes")]
    TrailingBytes(usize),
    #[error("checkpoint field is malformed: {0}")]
    Malformed(String),
    #[error("tensor `{name}` has shape {found:?}, expected {expected:?}")]
    Shape {
        name: String,
        found: Vec<usize>,
        expected: Vec<usize>,
    },
    #[error("tensor `{0}` missing from checkpoint")]
    MissingTensor(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("{0}")]
    Usage(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 usage, 3 data/shape, 4 runtime divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) => 2,
            Error::Sim(_) | Error::NonFinite(_) => 4,
            Error::Checkpoint(_)
            | Error::LengthMismatch(_)
            | Error::Data(_)
            | Error::Io { .. }
            | Error::Csv(_) => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
