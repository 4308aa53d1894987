use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate separation: need 0 < lambda_d < lambda_b, got lambda_d={lambda_d}, lambda_b={lambda_b}")]
    DegenerateSeparation { lambda_d: f64, lambda_b: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty histogram")]
    EmptyHistogram,

    #[error("insufficient statistics: {0}")]
    Statistics(String),

    #[error("{path}: malformed event file at byte {offset}: {reason}")]
    Format {
        path: PathBuf,
        offset: u64,
        reason: String,
    },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("records not sorted by time at index {index}")]
    Unsorted { index: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
