use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("i/o error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed document: {0}")]
    Malformed(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("infeasible geometry: {0}")]
    InfeasibleGeometry(String),

    #[error("initial-pose sampling exhausted after {attempts} attempts")]
    SamplingExhausted { attempts: usize },

    #[error("reset rejected: {0}")]
    ResetRejected(String),

    #[error("environment protocol error: {0}")]
    Protocol(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("planning failed ({cause}) after expanding {nodes_expanded} nodes")]
    PlanningFailed {
        cause: PlanFailureCause,
        nodes_expanded: usize,
    },

    #[error("worker {worker}: {source}")]
    Worker {
        worker: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanFailureCause {
    Exhausted,
    TimedOut,
}

impl std::fmt::Display for PlanFailureCause {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PlanFailureCause::Exhausted => "search frontier exhausted",
            PlanFailureCause::TimedOut => "time budget exceeded",
        })
    }
}
