use std::path::PathBuf;

use nowcast_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{0}")]
    Config(String),
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: row {row}: {message}", .path.display())]
    Row { path: PathBuf, row: u64, message: String },
    #[error("{}: {message}", .path.display())]
    Format { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Failure class shown in diagnostics.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Core(e) => match e {
                CoreError::Separation { .. }
                | CoreError::Singular { .. }
                | CoreError::ConstantCovariate(_)
                | CoreError::NotConverged(_)
                | CoreError::DegenerateOutcome(_)
                | CoreError::EmptyStratum(_)
                | CoreError::ZeroBaseProbability(_) => "convergence",
                CoreError::InfeasibleTarget { .. } => "alignment",
                _ => "data",
            },
            Error::Io { .. } | Error::Row { .. } | Error::Format { .. } => "data",
        }
    }

    /// 1 for configuration errors, 2 for everything that fails at run time.
    pub fn exit_code(&self) -> i32 {
        if matches!(self, Error::Config(_)) {
            1
        } else {
            2
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
