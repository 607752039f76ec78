use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, UgeError>;

#[derive(Debug, Error)]
pub enum UgeError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("io error: {0}")]
    Stream(#[from] io::Error),

    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("unknown node id `{0}` in edge file")]
    UnknownNode(String),

    #[error("edge file contains no usable edges")]
    EmptyEdgeSet,

    #[error("attribute row {line} has {found} fields, expected {expected}")]
    RaggedRow {
        line: usize,
        found: usize,
        expected: usize,
    },

    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    #[error("invalid binary graph: {0}")]
    Format(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("node {node} out of range for graph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("self pair ({0}, {0}) has no structural edge probability")]
    SelfPair(usize),

    #[error("combination key {0} not present in ratio table")]
    MissingKey(String),

    #[error("ratio table does not match graph: {0}")]
    SchemaMismatch(String),

    #[error("group with key {0} has zero pairs")]
    ZeroPairGroup(String),

    #[error("enumeration over {0} nodes exceeds the limit of {1}")]
    TooLarge(usize, usize),

    #[error("regime `{0}` requires a ratio table")]
    MissingRatioTable(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

impl UgeError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        UgeError::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the error stems from bad user input rather than a failure
    /// during computation or IO.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            UgeError::Io { .. } | UgeError::Stream(_) | UgeError::NonFinite(_)
        )
    }
}
