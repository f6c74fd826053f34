use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the numerical kernels, the reduction drivers and the I/O layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: {detail}")]
    Dimension { context: &'static str, detail: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("Sylvester operator is singular: eigenvalue sum {min_sum:.3e} within tolerance {tolerance:.3e}")]
    SingularOperator { min_sum: f64, tolerance: f64 },

    #[error("shift d[{index}] = {re}{im:+}i collides with the spectrum")]
    SingularShift { index: usize, re: f64, im: f64 },

    #[error("matrix is not (numerically) diagonalizable: eigenvector condition number {condition:.3e}")]
    NonDiagonalizable { condition: f64 },

    #[error("eigenvector transform is ill-conditioned: condition number {condition:.3e}")]
    Conditioning { condition: f64 },

    #[error("complex basis column {column} has no conjugate partner")]
    Pairing { column: usize },

    #[error("basis is rank deficient: effective rank {rank} < {expected}")]
    RankDeficient { rank: usize, expected: usize },

    #[error("projection breakdown: W^T V has condition number {condition:.3e}")]
    ProjectionBreakdown { condition: f64 },

    #[error("Gramian {which} could not be computed: {source}")]
    Gramian {
        which: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("explicit Kronecker evaluation needs {unknowns} unknowns, cap is {cap}")]
    SizeCap { unknowns: usize, cap: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(context: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            context,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn gramian(which: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Gramian {
            which,
            source: Box::new(source),
        }
    }
}
