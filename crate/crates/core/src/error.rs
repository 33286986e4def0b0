use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = PcxError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PcxError {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("input rejected at layer {layer}: {message}")]
    LayerMismatch { layer: usize, message: String },

    #[error("{what} index {index} out of range (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("malformed data at byte offset {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<PcxError>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate vector: {0}")]
    Degenerate(String),

    #[error("rank-deficient basis, dependent columns {columns:?}")]
    RankDeficient { columns: Vec<usize> },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("no prototype model for class {0}")]
    MissingClass(usize),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl PcxError {
    pub fn io_at(path: &Path, err: std::io::Error) -> Self {
        PcxError::InFile {
            path: path.to_path_buf(),
            source: Box::new(PcxError::Io(err)),
        }
    }

    pub fn with_path(self, path: &Path) -> Self {
        match self {
            e @ PcxError::InFile { .. } => e,
            e => PcxError::InFile {
                path: path.to_path_buf(),
                source: Box::new(e),
            },
        }
    }

    /// True when the failure stems from numerics rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            PcxError::Numerical(_) | PcxError::Degenerate(_) | PcxError::RankDeficient { .. } => {
                true
            }
            PcxError::InFile { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
