use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("no rows survived validation")]
    EmptyDataset,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("split of {n_rows} rows at fraction {fraction} leaves an empty partition")]
    InvalidSplit { n_rows: usize, fraction: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no convergence after {max_iter} iterations")]
    Convergence { max_iter: usize },

    /// Graphical lasso ran out of sweeps; the last iterate is kept so callers
    /// can inspect how far the solve got.
    #[error("graphical lasso did not converge after {max_iter} sweeps (lambda = {lambda})")]
    GlassoConvergence {
        max_iter: usize,
        lambda: f64,
        last: Box<crate::glasso::PrecisionResult>,
    },

    #[error("matrix is singular")]
    Singular,

    #[error("complete or quasi-complete separation in logistic fit")]
    Separation,

    #[error("degenerate covariance")]
    Degenerate,

    #[error("config error: {0}")]
    Config(String),

    #[error("all {0} trials failed")]
    AllTrialsFailed(usize),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
