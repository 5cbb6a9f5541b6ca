//! Confidence-weighted association costs and the three-level matching cascade.
//!
//! The fused cost of detection `i` against track `j` is
//! `(1 - IoU) * s_loc(i) + cosine_cost * s_det(i)`: a detection with a tight
//! box leans on geometry, a confident detection leans on appearance. The same
//! cost is used at every cascade level.

use crate::assignment::{solve_assignment, AssignmentResult, CostMatrix};
use crate::detection::Detection;
use crate::embedding::{cosine_cost, Embedding};
use crate::error::{Error, Result};
use crate::geometry::{iou, iou_cost, BBox};
use crate::tracker::TrackState;

/// Appearance cost used when either side has no embedding.
pub const MISSING_APPEARANCE_COST: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeConfig {
    pub th_high: f64,
    pub th_low: f64,
    pub iou_min: f64,
    pub max_cost: f64,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            th_high: 0.6,
            th_low: 0.1,
            iou_min: 0.1,
            max_cost: 1.4,
        }
    }
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.th_low && self.th_low < self.th_high && self.th_high <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= th_low < th_high <= 1, got th_low={} th_high={}",
                self.th_low, self.th_high
            )));
        }
        if !(0.0..1.0).contains(&self.iou_min) {
            return Err(Error::InvalidConfig(format!(
                "iou_min must lie in [0, 1), got {}",
                self.iou_min
            )));
        }
        if !(self.max_cost > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "max_cost must be > 0, got {}",
                self.max_cost
            )));
        }
        Ok(())
    }
}

/// How the motion and appearance terms are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CostWeighting {
    /// Weights are the detection's localization and detection confidences.
    #[default]
    Adaptive,
    /// Both weights fixed at one.
    Fixed,
}

fn appearance_cost(det: Option<&Embedding>, track: Option<&Embedding>) -> f64 {
    match (det, track) {
        // mismatched spaces carry no usable evidence
        (Some(a), Some(b)) => cosine_cost(a, b).unwrap_or(MISSING_APPEARANCE_COST),
        _ => MISSING_APPEARANCE_COST,
    }
}

/// Fused cost under the given weighting.
pub fn weighted_cost(
    det: &Detection,
    track_box: &BBox,
    track_feature: Option<&Embedding>,
    weighting: CostWeighting,
) -> f64 {
    let (w_motion, w_appearance) = match weighting {
        CostWeighting::Adaptive => (det.conf.s_loc, det.conf.s_det),
        CostWeighting::Fixed => (1.0, 1.0),
    };
    let motion = iou_cost(&det.bbox, track_box);
    let appearance = appearance_cost(det.embedding.as_ref(), track_feature);
    motion * w_motion + appearance * w_appearance
}

/// Confidence-weighted fusion of motion and appearance cost.
pub fn fused_cost(det: &Detection, track_box: &BBox, track_feature: Option<&Embedding>) -> f64 {
    weighted_cost(det, track_box, track_feature, CostWeighting::Adaptive)
}

/// Cost matrix with detections as rows and tracks as columns.
pub fn build_cost_matrix(
    dets: &[Detection],
    tracks: &[(BBox, Option<Embedding>)],
    weighting: CostWeighting,
) -> CostMatrix {
    CostMatrix::from_fn(dets.len(), tracks.len(), |i, j| {
        weighted_cost(&dets[i], &tracks[j].0, tracks[j].1.as_ref(), weighting)
    })
}

/// Demotes matches whose raw IoU is below `iou_min`.
pub fn gate_by_iou(
    mut result: AssignmentResult,
    det_boxes: &[BBox],
    track_boxes: &[BBox],
    iou_min: f64,
) -> AssignmentResult {
    result.retain_matches(|d, t| iou(&det_boxes[d], &track_boxes[t]) >= iou_min);
    result
}

/// What the cascade needs to know about one track.
#[derive(Debug, Clone)]
pub struct TrackSnapshot {
    pub state: TrackState,
    pub bbox: BBox,
    pub feature: Option<Embedding>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    /// High-confidence detections against tracked and lost tracks.
    Primary,
    /// Low-confidence detections against tracked tracks left over.
    Secondary,
    /// Remaining high-confidence detections against unconfirmed tracks.
    Unconfirmed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Match {
    pub detection: usize,
    pub track: usize,
    pub level: Level,
}

/// Cascade output, all indices global to the inputs.
#[derive(Debug, Clone, Default)]
pub struct CascadeOutcome {
    /// Per-level results in cascade order.
    pub levels: Vec<(Level, AssignmentResult)>,
    pub matches: Vec<Match>,
    /// Detections at or above `th_low` that found no track.
    pub unmatched_detections: Vec<usize>,
    pub unmatched_tracks: Vec<usize>,
    /// Detections below `th_low`, never considered.
    pub discarded: Vec<usize>,
}

fn run_level(
    level: Level,
    dets: &[Detection],
    det_idx: &[usize],
    tracks: &[TrackSnapshot],
    track_idx: &[usize],
    cfg: &CascadeConfig,
    weighting: CostWeighting,
) -> AssignmentResult {
    let level_dets: Vec<Detection> = det_idx.iter().map(|&i| dets[i].clone()).collect();
    let level_tracks: Vec<(BBox, Option<Embedding>)> = track_idx
        .iter()
        .map(|&j| (tracks[j].bbox, tracks[j].feature.clone()))
        .collect();
    let costs = build_cost_matrix(&level_dets, &level_tracks, weighting);
    let solved = solve_assignment(&costs, cfg.max_cost);
    let det_boxes: Vec<BBox> = level_dets.iter().map(|d| d.bbox).collect();
    let track_boxes: Vec<BBox> = level_tracks.iter().map(|t| t.0).collect();
    let local = gate_by_iou(solved, &det_boxes, &track_boxes, cfg.iou_min);
    log::trace!("{level:?}: {} matches", local.matches.len());

    AssignmentResult {
        matches: local
            .matches
            .iter()
            .map(|&(d, t)| (det_idx[d], track_idx[t]))
            .collect(),
        unmatched_detections: local.unmatched_detections.iter().map(|&d| det_idx[d]).collect(),
        unmatched_tracks: local.unmatched_tracks.iter().map(|&t| track_idx[t]).collect(),
    }
}

/// Three-level association cascade.
pub fn run_cascade(
    dets: &[Detection],
    tracks: &[TrackSnapshot],
    cfg: &CascadeConfig,
    weighting: CostWeighting,
) -> CascadeOutcome {
    let mut high = Vec::new();
    let mut low = Vec::new();
    let mut discarded = Vec::new();
    for (i, d) in dets.iter().enumerate() {
        if d.s_det() >= cfg.th_high {
            high.push(i);
        } else if d.s_det() >= cfg.th_low {
            low.push(i);
        } else {
            discarded.push(i);
        }
    }
    let by_state = |pred: fn(TrackState) -> bool| -> Vec<usize> {
        (0..tracks.len()).filter(|&j| pred(tracks[j].state)).collect()
    };
    let active = by_state(|s| matches!(s, TrackState::Tracked | TrackState::Lost));
    let unconfirmed = by_state(|s| s == TrackState::New);

    let first = run_level(Level::Primary, dets, &high, tracks, &active, cfg, weighting);

    let leftover_tracked: Vec<usize> = first
        .unmatched_tracks
        .iter()
        .copied()
        .filter(|&j| tracks[j].state == TrackState::Tracked)
        .collect();
    let second = run_level(Level::Secondary, dets, &low, tracks, &leftover_tracked, cfg, weighting);

    let third = run_level(
        Level::Unconfirmed,
        dets,
        &first.unmatched_detections,
        tracks,
        &unconfirmed,
        cfg,
        weighting,
    );

    let mut matches = Vec::new();
    for (level, r) in [(Level::Primary, &first), (Level::Secondary, &second), (Level::Unconfirmed, &third)] {
        matches.extend(r.matches.iter().map(|&(d, t)| Match {
            detection: d,
            track: t,
            level,
        }));
    }

    let mut det_matched = vec![false; dets.len()];
    let mut track_matched = vec![false; tracks.len()];
    for m in &matches {
        det_matched[m.detection] = true;
        track_matched[m.track] = true;
    }
    let unmatched_detections = high
        .iter()
        .chain(low.iter())
        .copied()
        .filter(|&i| !det_matched[i])
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let unmatched_tracks = (0..tracks.len())
        .filter(|&j| !track_matched[j] && tracks[j].state != TrackState::Removed)
        .collect();

    CascadeOutcome {
        levels: vec![
            (Level::Primary, first),
            (Level::Secondary, second),
            (Level::Unconfirmed, third),
        ],
        matches,
        unmatched_detections,
        unmatched_tracks,
        discarded,
    }
}
