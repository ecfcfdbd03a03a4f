use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("data matrix needs at least {min} rows and 1 column, got {rows}x{cols}")]
    TooSmall {
        rows: usize,
        cols: usize,
        min: usize,
    },

    #[error("input must be column-centered")]
    NotCentered,

    #[error("column index {index} out of range for p = {p}")]
    IndexOutOfRange { index: usize, p: usize },

    #[error("invalid column index set: {0}")]
    InvalidIndexSet(String),

    #[error("not a permutation of 0..{len}: {reason}")]
    InvalidPermutation { len: usize, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("rank k = {k} out of range 1..={max}")]
    RankOutOfRange { k: usize, max: usize },

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("zero vector: {0}")]
    ZeroVector(&'static str),

    #[error("true eigenvalue must be positive, got {0}")]
    NonPositiveTruth(f64),

    #[error("cross data matrix is zero")]
    ZeroCrossMatrix,

    #[error("column {column} has zero variance")]
    ZeroVariance { column: usize },

    #[error("blocks overlap at column {column}")]
    Overlap { column: usize },

    #[error("column {column} is not covered by any block")]
    Gap { column: usize },

    #[error("block {block} is empty")]
    EmptyBlock { block: usize },

    #[error("cannot merge an odd number of blocks ({0})")]
    OddBlockCount(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("block {block}: loading column {column} does not have unit norm")]
    NotUnitNorm { block: usize, column: usize },

    #[error("total variance is zero")]
    ZeroTotalVariance,

    #[error("loading vector {component} is constant; correlation undefined")]
    ConstantLoading { component: usize },

    #[error("block {block}: {source}")]
    InBlock {
        block: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{count} replicate runs failed; first: {first}")]
    ReplicateFailures { count: usize, first: String },

    #[error("{path}: row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}: row {row}, column {col}: cannot parse {value:?} as a number")]
    BadCell {
        path: PathBuf,
        row: usize,
        col: usize,
        value: String,
    },

    #[error("{path}: {reason}")]
    BadFile { path: PathBuf, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Broad failure class, used to pick a process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub fn in_block(block: usize, err: Error) -> Self {
        Error::InBlock {
            block,
            source: Box::new(err),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            InBlock { source, .. } => source.kind(),
            NonConvergence { .. } | ZeroCrossMatrix | ZeroVector(_) | ReplicateFailures { .. } => {
                ErrorKind::Numerical
            }
            RankOutOfRange { .. }
            | InvalidConfig(_)
            | OddBlockCount(_)
            | InvalidPermutation { .. }
            | InvalidIndexSet(_) => ErrorKind::Usage,
            _ => ErrorKind::Data,
        }
    }

    /// Short machine-readable tag for JSON error reports.
    pub fn code(&self) -> &'static str {
        use Error::*;
        match self {
            NonFinite { .. } => "non_finite",
            TooSmall { .. } => "too_small",
            NotCentered => "not_centered",
            IndexOutOfRange { .. } => "index_out_of_range",
            InvalidIndexSet(_) => "invalid_index_set",
            InvalidPermutation { .. } => "invalid_permutation",
            DimensionMismatch { .. } => "dimension_mismatch",
            RankOutOfRange { .. } => "rank_out_of_range",
            NonConvergence { .. } => "non_convergence",
            ZeroVector(_) => "zero_vector",
            NonPositiveTruth(_) => "non_positive_truth",
            ZeroCrossMatrix => "zero_cross_matrix",
            ZeroVariance { .. } => "zero_variance",
            Overlap { .. } => "overlap",
            Gap { .. } => "gap",
            EmptyBlock { .. } => "empty_block",
            OddBlockCount(_) => "odd_block_count",
            InvalidConfig(_) => "invalid_config",
            NotUnitNorm { .. } => "not_unit_norm",
            ZeroTotalVariance => "zero_total_variance",
            ConstantLoading { .. } => "constant_loading",
            InBlock { source, .. } => source.code(),
            ReplicateFailures { .. } => "replicate_failures",
            RaggedRow { .. } => "ragged_row",
            BadCell { .. } => "bad_cell",
            BadFile { .. } => "bad_file",
            Io { .. } => "io",
            Csv(_) => "csv",
            Json(_) => "json",
        }
    }
}
