use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {what} at line {line}: {msg}")]
    Parse {
        what: String,
        line: usize,
        msg: String,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("no word reaches the minimum count of {min_count}")]
    EmptyVocabulary { min_count: u64 },

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("solver did not converge after {iterations} iterations (residual bound {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("matrix is numerically rank deficient: reached rank {achieved} of requested {requested}")]
    RankDeficient { achieved: usize, requested: usize },

    #[error("non-finite value in {factor} at index {index} (iteration {iteration})")]
    Numerical {
        factor: &'static str,
        index: usize,
        iteration: usize,
    },

    #[error("word not in vocabulary: {0}")]
    OutOfVocabulary(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("unbalanced or invalid design: {0}")]
    Design(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            what: what.into(),
            line,
            msg: msg.into(),
        }
    }
}
