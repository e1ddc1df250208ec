use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failure to read or write a data file.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}row {row}{}: {message}", path_prefix(path), column.map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse {
        path: Option<PathBuf>,
        row: usize,
        column: Option<usize>,
        message: String,
    },

    #[error(
        "{}row {row} has {found} fields, expected {expected}",
        path_prefix(path)
    )]
    Ragged {
        path: Option<PathBuf>,
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("{}{message}", path_prefix(path))]
    Format {
        path: Option<PathBuf>,
        message: String,
    },
}

fn path_prefix(path: &Option<PathBuf>) -> String {
    path.as_ref()
        .map(|p| format!("{}: ", p.display()))
        .unwrap_or_default()
}

impl DataError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_owned(),
            source,
        }
    }

    pub fn format(path: &Path, message: impl Into<String>) -> Self {
        Self::Format {
            path: Some(path.to_owned()),
            message: message.into(),
        }
    }

    /// Attaches the file name to errors raised while parsing a stream.
    pub fn with_path(self, p: &Path) -> Self {
        let p = Some(p.to_owned());
        match self {
            Self::Parse {
                row,
                column,
                message,
                ..
            } => Self::Parse {
                path: p,
                row,
                column,
                message,
            },
            Self::Ragged {
                row,
                expected,
                found,
                ..
            } => Self::Ragged {
                path: p,
                row,
                expected,
                found,
            },
            Self::Format { message, .. } => Self::Format { path: p, message },
            io @ Self::Io { .. } => io,
        }
    }
}
