use std::path::PathBuf;

/// Errors emitted by the engine and its storage layer.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("corrupt store file {path}: {detail}")]
    CorruptStore { path: PathBuf, detail: String },

    #[error("store schema version {found} is newer than supported version {supported}")]
    SchemaVersion { found: u32, supported: u32 },

    #[error("store was written with embedder {stored:?} but {configured:?} is configured")]
    EmbedderMismatch { stored: String, configured: String },

    #[error("event text must be non-empty")]
    EmptyText,

    #[error("event timestamp must be non-negative, got {0}")]
    NegativeTimestamp(i64),

    #[error("unknown event id {0}")]
    UnknownEvent(u64),

    #[error("requested k={requested} exceeds configured final_k={final_k}")]
    KTooLarge { requested: usize, final_k: usize },

    #[error("invalid gate config: {0}")]
    InvalidGateConfig(String),

    #[error("config parse error at line {line}: {detail}")]
    ConfigParse { line: usize, detail: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
