use std::path::PathBuf;

use crate::tracker::TrackState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid box ({x}, {y}, {w}, {h}): width and height must be positive and finite")]
    InvalidBox { x: f64, y: f64, w: f64, h: f64 },

    #[error("confidence {name}={value} outside [0, 1]")]
    InvalidConfidence { name: &'static str, value: f64 },

    #[error("unusable embedding: {0}")]
    InvalidEmbedding(String),

    #[error("incompatible embedding spaces: expected dimension {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate Kalman filter: innovation covariance is not positive-definite")]
    DegenerateFilter,

    #[error("corrupted input ordering: frame {got} received after frame {previous}")]
    FrameOrder { previous: u32, got: u32 },

    #[error("illegal lifecycle transition for track {id}: {from:?} -> {to:?}")]
    IllegalTransition { id: u64, from: TrackState, to: TrackState },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("embedding sidecar {}: {message}", path.display())]
    Sidecar { path: PathBuf, message: String },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
