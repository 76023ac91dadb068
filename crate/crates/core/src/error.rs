use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("ingest error at {file}:{line}: {msg}")]
    Ingest {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("partition error: {0}")]
    Partition(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("model error: {0}")]
    Model(String),

    /// A forward pass needed an external row that was never delivered.
    #[error("missing external embedding: client {client}, layer {layer}, node {node}")]
    MissingExternal {
        client: usize,
        layer: usize,
        node: usize,
    },

    #[error("privacy violation: {0}")]
    PrivacyViolation(String),

    #[error("authorization error: {0}")]
    Authorization(String),

    #[error("exchange error: {0}")]
    Exchange(String),

    #[error("round {round} aborted: {reason}")]
    RoundAborted { round: usize, reason: String },

    #[error("state error: {0}")]
    State(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }
}
