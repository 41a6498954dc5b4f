use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unknown node label `{0}`")]
    UnknownNode(String),

    #[error("node index {node} out of range for {node_count} nodes")]
    NodeOutOfRange { node: usize, node_count: usize },

    #[error("community {0} does not exist")]
    UnknownCommunity(usize),

    #[error("node {node} is already a member of community {community}")]
    AlreadyMember { node: usize, community: usize },

    #[error("node {0} must be detached from every community before evaluating a gain")]
    NodeNotDetached(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error("invalid training data: {0}")]
    Training(String),

    #[error("malformed model: {0}")]
    Model(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
