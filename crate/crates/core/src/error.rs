use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by callers to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad configuration or flag combination.
    Usage,
    /// Unreadable, malformed, or inconsistent data on disk.
    Data,
    /// Numerical failure during training or evaluation.
    Numeric,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    BadFormat { path: PathBuf, reason: String },

    #[error("invalid manifest:\n  {}", violations.join("\n  "))]
    InvalidManifest { violations: Vec<String> },

    #[error("cannot stratify class {class}: only {count} video(s) in it")]
    CannotStratify { class: usize, count: usize },

    #[error(
        "non-finite loss ({value}) at epoch {epoch}, batch {batch} \
         (loss={loss_kind}, lr={lr:e}, batch ids {batch_ids:?})"
    )]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        value: f64,
        loss_kind: String,
        lr: f64,
        batch_ids: Vec<String>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn bad_format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::BadFormat {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) => ErrorCategory::Usage,
            Error::Io { .. }
            | Error::BadFormat { .. }
            | Error::InvalidManifest { .. }
            | Error::CannotStratify { .. } => ErrorCategory::Data,
            Error::NonFiniteLoss { .. } => ErrorCategory::Numeric,
        }
    }
}
