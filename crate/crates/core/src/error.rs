use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid genotype {value:?} at sample {sample}, snp {snp}")]
    InvalidGenotype { sample: String, snp: String, value: String },

    #[error("missing value at sample {sample}, column {column}")]
    MissingValue { sample: String, column: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("sample id {0:?} has no match in the other input files")]
    UnmatchedSample(String),

    #[error("invalid binary phenotype {value} for sample {sample}: expected 0/1 or -1/1")]
    InvalidPhenotype { sample: String, value: f64 },

    #[error("dataset is already centered")]
    AlreadyCentered,

    #[error("dataset must be centered before fitting")]
    NotCentered,

    #[error("SNP sets differ; only in first: {only_first:?}; only in second: {only_second:?}")]
    SnpMismatch {
        only_first: Vec<String>,
        only_second: Vec<String>,
    },

    #[error("covariate matrix is rank deficient; dependent columns: {0:?}")]
    RankDeficient(Vec<String>),

    #[error("covariate cross-product is ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("non-finite value in {what} at iteration {iteration}")]
    NonFinite { what: String, iteration: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{0}")]
    Degenerate(String),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Numerical failures are distinguished from data errors by the CLI exit code.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. } | Error::IllConditioned(_) | Error::Degenerate(_)
        )
    }
}
