use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bounding box: {0}")]
    InvalidBox(String),

    #[error("box lies entirely outside the {width}x{height} frame")]
    BoxOutsideFrame { width: usize, height: usize },

    #[error("frame size mismatch: {0}x{1} vs {2}x{3}")]
    FrameSizeMismatch(usize, usize, usize, usize),

    #[error("histogram does not sum to 1 (sum = {0})")]
    UnnormalizedHistogram(f64),

    #[error("descriptor shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("matrix is not symmetric positive-definite")]
    NotSpd,

    #[error("non-positive value {0} where a positive size was expected")]
    NonPositive(f64),

    #[error("non-finite entry at ({row}, {col}) of the score matrix")]
    NonFiniteScore { row: usize, col: usize },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: line {line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("image {path}: {msg}")]
    Image { path: PathBuf, msg: String },

    #[error("ground-truth id {id} appears twice in frame {frame}")]
    DuplicateId { frame: u32, id: i64 },

    #[error("missing frame data for frame {0}")]
    MissingFrame(u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
