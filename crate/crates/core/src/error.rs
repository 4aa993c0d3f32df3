use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: invalid UTF-8 at line {line}, byte offset {byte_offset}")]
    Utf8 {
        path: PathBuf,
        line: usize,
        byte_offset: usize,
    },

    #[error("malformed link line {line:?}: {reason}")]
    ParseLink { line: String, reason: String },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("document {doc_id}: sentence index {index} out of range (document has {len} sentences)")]
    Range {
        doc_id: String,
        index: usize,
        len: usize,
    },

    #[error("validation error: {0}")]
    Validation(String),

    /// A precondition of an operation was not met by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("stage {stage}{}: {source}", doc_id.as_deref().map(|d| format!(", document {d}")).unwrap_or_default())]
    Stage {
        stage: &'static str,
        doc_id: Option<String>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str, doc_id: Option<&str>) -> Self {
        Error::Stage {
            stage,
            doc_id: doc_id.map(str::to_owned),
            source: Box::new(self),
        }
    }

    /// Whether the error stems from invalid user input or configuration
    /// rather than a failure while processing.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation(_)
                | Error::Config(_)
                | Error::ParseLink { .. }
                | Error::Parse { .. }
                | Error::Utf8 { .. }
                | Error::Range { .. }
        )
    }
}
