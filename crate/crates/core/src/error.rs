use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("dimension mismatch: {0}")]
    Dim(String),

    #[error("matrix is numerically singular (reciprocal condition estimate {rcond:.3e})")]
    Singular { rcond: f64 },

    #[error("allocation of {bytes} bytes for {what} exceeds the limit of {limit} bytes")]
    Alloc {
        what: &'static str,
        bytes: usize,
        limit: usize,
    },

    #[error("bisection bracket failure: squared norm {at_zero:.6e} at nu = 0, {at_upper:.6e} at nu = {upper:.3e}, budget {budget:.6e}")]
    Bracket {
        at_zero: f64,
        at_upper: f64,
        upper: f64,
        budget: f64,
    },

    #[error("undefined result: {0}")]
    Undefined(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
