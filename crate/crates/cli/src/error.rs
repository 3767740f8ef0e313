use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Data(String),

    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] ibounds::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// Process exit code: 1 usage, 2 data, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        use ibounds::Error as E;
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) | CliError::Io { .. } => 2,
            CliError::Core(e) => match e {
                E::InvalidLevel(_) | E::LevelMismatch(..) => 1,
                E::InvalidInput(_)
                | E::EmptySample
                | E::NonFinite { .. }
                | E::DegenerateCovariate
                | E::SparseCell { .. }
                | E::OutsideBoundary { .. } => 2,
                E::RankDeficient { .. }
                | E::NoValidCandidate
                | E::SparseNeighborhood { .. }
                | E::NotPsd { .. }
                | E::ZeroNorm { .. }
                | E::AnalyticUndefined(_)
                | E::TooManyFailures { .. } => 3,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
