use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the benchmark engine.
#[derive(Debug, Error)]
pub enum PllError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("example {index}: expected {expected} features, found {found}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("example {index}: label {label} out of range for {q} classes")]
    LabelOutOfRange { index: usize, label: usize, q: usize },
    #[error("example {index}: empty candidate set")]
    EmptyCandidateSet { index: usize },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("example {index} has no true label")]
    MissingTrueLabel { index: usize },
    #[error("invalid generation model: {0}")]
    InvalidGeneration(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid hyperparameter for {algorithm}: {message}")]
    InvalidHyperparameter {
        algorithm: &'static str,
        message: String,
    },
    #[error("invalid algorithm state: {0}")]
    InvalidState(String),
    #[error("criterion {0} requires validation true labels")]
    LabelsRequired(&'static str),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("split {0} has no successful runs")]
    NoSuccessfulRuns(usize),
    #[error("unknown {kind} `{value}`")]
    Unknown { kind: &'static str, value: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = PllError> = std::result::Result<T, E>;
