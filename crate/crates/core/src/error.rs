use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the planner and its supporting modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid robot parameters: {0}")]
    InvalidParams(String),

    #[error("degenerate phase duration: {0}")]
    DegenerateDuration(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("time {t} outside profile range [0, {end}]")]
    OutOfRange { t: f64, end: f64 },

    #[error("degenerate contact geometry: {0}")]
    Geometry(String),

    #[error("foot target outside leg workspace (deficit {deficit:.6} m)")]
    Reach { deficit: f64 },

    #[error("singular leg jacobian (det = {det:e})")]
    Singular { det: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no library entry matches the query")]
    NoMatch,

    #[error("corrupt trajectory file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    #[error("storage error for {path}: {source}")]
    Storage {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("yaml error: {0}")]
    Yaml(#[from] serde_yaml::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn storage(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Storage {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn corrupt(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Corrupt {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
