use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SllgError {
    #[error("invalid basis parameters: {0}")]
    InvalidBasis(String),

    #[error("basis mismatch: operands live on different spectral bases")]
    BasisMismatch,

    #[error("mode count {requested} exceeds basis size {available}")]
    ModeOutOfRange { requested: usize, available: usize },

    #[error("noise channel {index} out of range (model has {count} channels)")]
    ChannelOutOfRange { index: usize, count: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid stepper configuration: {0}")]
    InvalidStepper(String),

    #[error("non-finite state encountered")]
    NonFinite,

    #[error(
        "implicit midpoint solve did not converge after {iterations} iterations \
         (last update {last_update:.3e}); reduce dt"
    )]
    NoConvergence { iterations: usize, last_update: f64 },

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<SllgError>,
    },

    #[error("wiener path mismatch: {0}")]
    PathMismatch(String),

    #[error("diagnostics: {0}")]
    Diagnostics(String),

    #[error("all {0} replicas failed")]
    AllReplicasFailed(usize),

    #[error("study: {0}")]
    Study(String),

    #[error("config {path}: {message}")]
    Config { path: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SllgError {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        SllgError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SllgError::Io {
            path: path.into(),
            source,
        }
    }

    /// Step index at which a trajectory aborted, if any.
    pub fn step_index(&self) -> Option<usize> {
        match self {
            SllgError::Step { step, .. } => Some(*step),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, SllgError>;
