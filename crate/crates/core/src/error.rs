use std::path::PathBuf;

use crate::store::Modality;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Shape or count disagreement between manifest and matrix, or a malformed record.
    #[error("format error: {0}")]
    Format(String),

    /// A value or record violates a store invariant.
    #[error("validation error at row {row}: {reason}")]
    Validation { row: usize, reason: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("corrupt store: {0}")]
    CorruptStore(String),

    #[error("ambiguous pair: clip `{clip_id}` occurs more than once in the {modality} store")]
    AmbiguousPair { clip_id: String, modality: Modality },

    #[error("pair mismatch for clip `{clip_id}`: {reason}")]
    PairMismatch { clip_id: String, reason: String },

    #[error("unresolved reference: {0}")]
    Reference(String),

    #[error("duplicate id `{0}`")]
    Duplicate(String),

    #[error("unknown label `{0}`")]
    Lookup(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("training diverged at epoch {epoch}, batch {batch}: loss is {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the filesystem rather than of the data or configuration.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Csv(e) => e.is_io_error(),
            Error::Json(e) => e.is_io(),
            _ => false,
        }
    }
}
