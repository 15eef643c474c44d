use thiserror::Error;

use crate::corpus::SplitKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse grouping of failures, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad configuration, schema, or input data.
    Data,
    /// A query could not be answered under the inference contract.
    Inference,
    /// Training or optimization produced non-finite numbers.
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error: column `{column}` not found in header")]
    MissingColumn { column: String },

    #[error("data error at line {line}: {message}")]
    Data { line: usize, message: String },

    #[error("duplicate sample id `{id}` at line {line}")]
    DuplicateId { id: String, line: usize },

    #[error("sample `{id}` has no label")]
    Unlabeled { id: String },

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("no embedding for ({split}, {id})")]
    MissingEmbedding { split: SplitKind, id: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite value in {what}")]
    NonFinite { what: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("empty support set for mwe `{mwe}`")]
    EmptySupport { mwe: String },

    #[error("no support samples for mwe(s): {}", .mwes.join(", "))]
    MissingSupport { mwes: Vec<String> },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::EmptySupport { .. } | Error::MissingSupport { .. } | Error::Contract(_) => {
                ErrorClass::Inference
            }
            Error::NonFinite { .. } => ErrorClass::Numeric,
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
