use std::path::PathBuf;

/// Errors produced by the factorization library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("rank-deficient matrix: numerical rank {rank} of {cols} columns")]
    RankDeficient { rank: usize, cols: usize },

    #[error("numerical collapse of power iterate: numerical rank {rank} of {cols} columns")]
    NumericalCollapse { rank: usize, cols: usize },

    #[error("zero matrix: {0}")]
    ZeroMatrix(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value at inner iteration {inner_iter}{}", outer_suffix(*.outer_iter))]
    NumericalFailure {
        outer_iter: Option<usize>,
        inner_iter: usize,
    },

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed data in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn outer_suffix(outer: Option<usize>) -> String {
    match outer {
        Some(t) => format!(" (outer iteration {t})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Attaches an outer iteration index to an inner-solver failure.
    pub(crate) fn at_outer(self, t: usize) -> Self {
        match self {
            Error::NumericalFailure { inner_iter, .. } => Error::NumericalFailure {
                outer_iter: Some(t),
                inner_iter,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
