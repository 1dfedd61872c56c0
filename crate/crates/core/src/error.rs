use std::path::PathBuf;

use crate::month::Month;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("not found: {}", .0.display())]
    NotFound(PathBuf),

    #[error("parse error in {}:{line}: {msg}", .file.display())]
    Parse {
        file: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("column `{0}` has no observed values and cannot be imputed")]
    Unimputable(String),

    #[error("column `{0}` has zero variance")]
    DegenerateColumn(String),

    #[error("labels contain a single class")]
    DegenerateClass,

    #[error("unsupported forecast horizon {0}; expected one of 0, 1, 3, 6, 12")]
    UnsupportedHorizon(u32),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("tuning failed: {0}")]
    Tuning(String),

    #[error("I/O error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("as of {as_of}: {source}")]
    AsOf {
        as_of: Month,
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

    pub(crate) fn parse(file: impl Into<PathBuf>, line: u64, msg: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn at(self, as_of: Month) -> Self {
        match self {
            e @ Error::AsOf { .. } => e,
            e => Error::AsOf {
                as_of,
                source: Box::new(e),
            },
        }
    }

    /// Prefixes the message with `context`, keeping the classification.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::AsOf { source, .. } | Error::Context { source, .. } => source.is_validation(),
            Error::Io { .. } | Error::Tuning(_) => false,
            _ => true,
        }
    }
}
