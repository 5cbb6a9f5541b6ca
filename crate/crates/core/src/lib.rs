//! Tracking-by-detection engine with confidence-guided filtering, association
//! and appearance updates.
//!
//! The pipeline consumes precomputed detections (boxes, three confidences and
//! optional appearance embeddings) and produces identity-labelled tracks:
//!
//! - [`kalman`]: constant-velocity filter whose measurement noise is scaled by
//!   detection confidence and time spent lost.
//! - [`association`]: motion/appearance costs weighted by localization and
//!   detection confidence, solved exactly by [`assignment`] in a three-level
//!   cascade.
//! - [`appearance`]: EMA, DA and SDA feature smoothing.
//! - [`tracker`]: the per-frame loop and track lifecycle.
//! - [`io`]: detection, sidecar, result, ground-truth and config files.
//! - [`sim`]: synthetic scenes, CLEAR/IDF1 evaluation and the ablation grid.

pub mod appearance;
pub mod assignment;
pub mod association;
pub mod detection;
pub mod embedding;
pub mod error;
pub mod geometry;
pub mod io;
pub mod kalman;
pub mod sim;
pub mod tracker;

pub use detection::{ConfidenceTriple, Detection, FrameDetections};
pub use embedding::Embedding;
pub use error::{Error, Result};
pub use geometry::BBox;
pub use tracker::{run_sequence, TrackRow, Tracker, TrackerConfig};
