use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{context}: dimension mismatch (expected {expected}, found {found})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("backward called before forward populated the tape")]
    TapeNotPopulated,

    #[error("batch normalization needs at least 2 samples in training mode, got {0}")]
    BatchTooSmall(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("parameter grid is empty")]
    EmptyGrid,

    #[error("dictionary is empty")]
    EmptyDictionary,

    #[error("signal is zero")]
    ZeroSignal,

    #[error("evaluation mask selects no pixels")]
    EmptyMask,

    #[error("ground truth has zero mean over the mask")]
    ZeroMeanTruth,

    #[error("malformed file: {0}")]
    Format(String),

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn mismatch(context: &'static str, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            found,
        }
    }
}
