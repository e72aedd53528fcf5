use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{kind} not found: {id}")]
    NotFound { kind: &'static str, id: String },

    #[error("chunk text is empty")]
    EmptyChunk,

    #[error("duplicate document id {0:?}")]
    DuplicateDocument(String),

    #[error("anchor is not unit norm (norm = {norm})")]
    InvalidAnchor { norm: f64 },

    #[error("index file corrupt at byte {offset}: {reason}")]
    IndexCorrupt { offset: u64, reason: String },

    #[error("index format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),

    #[error("embedding dimension changed from {expected} to {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid span: {0}")]
    InvalidSpan(String),

    #[error("embedding provider violated the protocol: {0}")]
    Protocol(String),

    #[error("input is empty")]
    EmptyInput,

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("index is empty")]
    EmptyIndex,

    #[error("no relevance judgments for query {0:?}")]
    MissingJudgment(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}, line {line}: {reason}")]
    Parse { path: String, line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn not_found(kind: &'static str, id: impl ToString) -> Self {
        Error::NotFound {
            kind,
            id: id.to_string(),
        }
    }

    /// Whether retrying the same call may succeed.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::ProviderUnavailable(_))
    }
}
