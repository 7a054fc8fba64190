use crate::corpus::{Language, VariantId};
use crate::learn::ModelKind;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("translator exited with {status}; stderr: {stderr}")]
    TranslatorFailed { status: String, stderr: String },

    #[error("translator protocol violation: sent {sent} lines, received {received}")]
    TranslatorProtocol { sent: usize, received: usize },

    #[error("incomplete report; missing cells: {0:?}")]
    IncompleteReport(Vec<(Language, ModelKind, VariantId)>),

    #[error("model file error: {0}")]
    ModelFormat(String),

    #[error("training aborted: {0}")]
    Training(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Wraps an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
