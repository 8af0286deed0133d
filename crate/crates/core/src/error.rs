use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix dimension must be positive")]
    EmptyMatrix,

    #[error("index ({row}, {col}) out of range for dimension {n}")]
    IndexOutOfRange { row: usize, col: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unsupported Matrix Market format: {0}")]
    UnsupportedFormat(String),

    #[error("matrix is not square ({rows} x {cols})")]
    NonSquare { rows: usize, cols: usize },

    #[error("matrix is structurally singular; {} column(s) cannot be matched: {columns:?}", columns.len())]
    StructurallySingular { columns: Vec<usize> },

    #[error("structurally zero diagonal at permuted row {row}")]
    ZeroDiagonal { row: usize },

    #[error("zero pivot at factor row {row} with perturbation disabled")]
    NumericBreakdown { row: usize },

    #[error("sparsity pattern differs from the analyzed matrix")]
    PatternMismatch,

    #[error("dependency cycle detected at node {node}")]
    CycleDetected { node: usize },

    #[error("expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable name of the error class, used by the CLI and the C API.
    pub fn class(&self) -> &'static str {
        match self {
            Error::EmptyMatrix => "EmptyMatrix",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::Parse { .. } => "ParseError",
            Error::UnsupportedFormat(_) => "UnsupportedFormat",
            Error::NonSquare { .. } => "NonSquare",
            Error::StructurallySingular { .. } => "StructurallySingular",
            Error::ZeroDiagonal { .. } => "ZeroDiagonal",
            Error::NumericBreakdown { .. } => "NumericBreakdown",
            Error::PatternMismatch => "PatternMismatch",
            Error::CycleDetected { .. } => "CycleDetected",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Io(_) => "Io",
        }
    }
}
