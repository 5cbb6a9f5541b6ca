//! Synthetic scenes, CLEAR/IDF1 scoring and the ablation grid.

pub mod ablation;
pub mod metrics;
pub mod scenario;

pub use ablation::{ablate, standard_variants, AblationTable, Variant};
pub use metrics::{evaluate, MetricsReport, DEFAULT_IOU_THRESHOLD};
pub use scenario::{simulate, ScenarioSpec, Scene};
