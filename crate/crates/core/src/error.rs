use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Coarse classification used for process exit codes and error reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Input,
    Validation,
    Numeric,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Input => 2,
            ErrorKind::Validation => 3,
            ErrorKind::Numeric => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("registry row {row}: {reason}")]
    Registry { row: usize, reason: String },

    #[error("index ({i}, {j}) outside 1..={n}")]
    IndexOutOfRange { i: usize, j: usize, n: usize },

    #[error("dimension mismatch: expected {expected} factors, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("no expert responses")]
    NoResponses,

    #[error("screening excluded all {0} responses")]
    AllResponsesExcluded(usize),

    #[error("consistency check failed: {0} violation(s)")]
    ConsistencyFailed(usize),

    #[error("reliability below acceptance: alpha = {alpha:.4} < {minimum}")]
    Unreliable { alpha: f64, minimum: f64 },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("reachability matrix is not transitively closed")]
    NotClosed,

    #[error("level partition stuck; unassigned factors {stuck:?}")]
    PartitionFailure { stuck: Vec<usize> },

    #[error("spectral condition violated: {0}")]
    Spectral(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("missing intermediate {}; run `{stage}` first", path.display())]
    MissingIntermediate { path: PathBuf, stage: &'static str },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{stage} stage: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Stage { source, .. } => source.kind(),
            Error::ConsistencyFailed(_)
            | Error::Unreliable { .. }
            | Error::AllResponsesExcluded(_)
            | Error::PartitionFailure { .. }
            | Error::NotClosed => ErrorKind::Validation,
            Error::DegenerateData(_) | Error::Spectral(_) | Error::Singular(_) => {
                ErrorKind::Numeric
            }
            _ => ErrorKind::Input,
        }
    }

    /// Pipeline stage the error was raised in, when known.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }

    /// Machine-readable error report.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "error": self.kind(),
            "exit_code": self.kind().exit_code(),
            "stage": self.stage(),
            "message": self.to_string(),
        })
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    pub(crate) fn parse(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.to_owned(),
            line,
            message: message.into(),
        }
    }

    pub fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
