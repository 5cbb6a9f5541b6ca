//! On-disk formats: detection tables with embedding sidecars, result and
//! ground-truth files, and run configuration.

pub mod config;
pub mod detections;
pub mod results;

pub use config::RunConfig;
pub use detections::{read_detections, write_detections};
pub use results::{read_ground_truth, read_tracks, write_ground_truth, write_tracks, LabeledBox};
