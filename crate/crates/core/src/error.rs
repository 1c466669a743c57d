use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, GplsiError>;

#[derive(Debug, Error)]
pub enum GplsiError {
    #[error("document {row} has zero length")]
    ZeroLengthDocument { row: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("graph with {n} nodes exceeds the dense diagnostic limit of {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("rank deficient: only {found} of {wanted} eigenvalues above threshold")]
    RankDeficient { found: usize, wanted: usize },

    #[error("vertex hunting degenerated after {picked} of {wanted} picks")]
    DegenerateGeometry { picked: usize, wanted: usize },

    #[error("vertex matrix is singular (smallest singular value {min_sv:e})")]
    SingularH { min_sv: f64 },

    #[error("matrix columns are not orthonormal (deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },

    #[error("values have zero variance")]
    ZeroVariance,

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl GplsiError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GplsiError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        GplsiError::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// True for errors caused by malformed input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            GplsiError::ZeroLengthDocument { .. }
                | GplsiError::DimensionMismatch(_)
                | GplsiError::InvalidParameter(_)
                | GplsiError::Parse { .. }
                | GplsiError::Io { .. }
                | GplsiError::Json(_)
                | GplsiError::Csv(_)
                | GplsiError::TooLarge { .. }
        )
    }
}
