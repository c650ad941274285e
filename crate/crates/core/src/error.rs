//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors produced while building graphs, loading features, training and
/// evaluating models.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid entity surface {0:?}: empty after trimming")]
    InvalidEntity(String),

    #[error("corpus error: {0}")]
    Corpus(String),

    #[error("label error: unknown ne_type {ne_type:?} in utterance {utterance_id:?}")]
    Label {
        utterance_id: String,
        ne_type: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("lookup error: no entry for key {0:?}")]
    Lookup(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("training error at epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape(msg.into()))
}
