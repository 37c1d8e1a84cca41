use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("unknown document id `{0}`")]
    DanglingId(String),

    #[error("judgment `{0}` compares a document with itself")]
    SelfPair(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch { context: String, expected: usize, found: usize },

    #[error("judgment `{pair_id}` has topic `{topic}` but document `{doc_id}` belongs to `{doc_topic}`")]
    TopicMismatch { pair_id: String, topic: String, doc_id: String, doc_topic: String },

    #[error("unknown topic `{0}`")]
    UnknownTopic(String),

    #[error("empty split: {0}")]
    EmptySplit(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("unsupported feature `{0}`")]
    UnsupportedFeature(String),

    #[error("feature `{0}` is missing")]
    MissingFeature(String),

    #[error("feature `{0}` is constant")]
    ConstantFeature(String),

    #[error("token `{0}` is not in the vocabulary")]
    OutOfVocabulary(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, msg: msg.into() }
    }
}
