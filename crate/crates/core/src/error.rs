use std::path::PathBuf;

use thiserror::Error;

use crate::graph::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("clock regression: t={t} is earlier than last visit {last_visit}")]
    ClockRegression { t: f64, last_visit: f64 },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("empty sample window")]
    EmptyWindow,

    #[error("unknown node id {0}")]
    UnknownNode(NodeId),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graph is empty")]
    EmptyGraph,

    #[error("graph is disconnected into {} components: {components:?}", components.len())]
    Disconnected { components: Vec<Vec<NodeId>> },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("not enough points: need {needed}, have {available}")]
    NotEnoughPoints { needed: usize, available: usize },

    #[error("traversable map is empty (robot enclosed)")]
    EmptyTraversableMap,

    #[error("unknown message type `{0}`")]
    UnknownMessageKind(String),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("parse error at {file}:{line}: {reason}")]
    Parse {
        file: String,
        line: usize,
        reason: String,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(file: impl Into<String>, line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            reason: reason.into(),
        }
    }
}
