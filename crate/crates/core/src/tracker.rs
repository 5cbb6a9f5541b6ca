//! Per-frame tracking loop and the track lifecycle.
//!
//! Every frame: predict all live tracks, run the association cascade, update
//! matched tracks (Kalman state with a scaled measurement noise, then the
//! appearance feature), age unmatched tracks, and spawn new tracks from
//! leftover high-confidence detections. Only `Tracked` tracks are reported.

use crate::appearance::{select_alpha, update_feature, FeatureUpdatePolicy};
use crate::association::{run_cascade, CascadeConfig, CostWeighting, TrackSnapshot};
use crate::detection::{Detection, FrameDetections};
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::kalman::{adaptive_factor, predict, update, KalmanState, NoiseConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrackState {
    New,
    Tracked,
    Lost,
    Removed,
}

impl TrackState {
    pub fn can_transition_to(self, next: TrackState) -> bool {
        use TrackState::*;
        matches!(
            (self, next),
            (New, Tracked) | (New, Removed) | (Tracked, Lost) | (Lost, Tracked) | (Lost, Removed)
        )
    }
}

/// How the measurement covariance is scaled on update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseScaling {
    /// Preset covariance, scale 1.
    Preset,
    /// Scale from detection confidence and time lost (see [`adaptive_factor`]).
    #[default]
    Adaptive,
    /// Scale `1 / s_det`. Only used as a comparison row by the ablation harness.
    InverseConfidence,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    pub noise: NoiseConfig,
    pub cascade: CascadeConfig,
    pub feature: FeatureUpdatePolicy,
    /// Matches after creation needed to confirm a new track.
    pub n_init: u32,
    pub noise_scaling: NoiseScaling,
    /// Confidence-weighted costs; unit weights when off.
    pub acm_enabled: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            noise: NoiseConfig::default(),
            cascade: CascadeConfig::default(),
            feature: FeatureUpdatePolicy::default(),
            n_init: 1,
            noise_scaling: NoiseScaling::Adaptive,
            acm_enabled: true,
        }
    }
}

impl TrackerConfig {
    /// All three improvements switched off: preset noise, unit cost weights,
    /// fixed-factor EMA.
    pub fn baseline() -> Self {
        Self {
            noise_scaling: NoiseScaling::Preset,
            acm_enabled: false,
            feature: FeatureUpdatePolicy {
                mode: crate::appearance::FeatureMode::Ema,
                ..FeatureUpdatePolicy::default()
            },
            ..Self::default()
        }
    }

    pub fn acmn_enabled(&self) -> bool {
        self.noise_scaling == NoiseScaling::Adaptive
    }

    pub fn set_acmn(&mut self, on: bool) {
        self.noise_scaling = if on {
            NoiseScaling::Adaptive
        } else {
            NoiseScaling::Preset
        };
    }

    pub fn weighting(&self) -> CostWeighting {
        if self.acm_enabled {
            CostWeighting::Adaptive
        } else {
            CostWeighting::Fixed
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        self.cascade.validate()?;
        self.feature.validate()?;
        if self.n_init < 1 {
            return Err(Error::InvalidConfig("n_init must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Track {
    pub id: u64,
    state: TrackState,
    pub kf: KalmanState,
    pub feature: Option<Embedding>,
    pub n_lost: u32,
    pub hits: u32,
    pub last_s_det: f64,
    pub start_frame: u32,
}

impl Track {
    pub fn state(&self) -> TrackState {
        self.state
    }

    pub fn bbox(&self) -> BBox {
        self.kf.bbox()
    }

    fn transition(&mut self, next: TrackState) -> Result<()> {
        if !self.state.can_transition_to(next) {
            return Err(Error::IllegalTransition {
                id: self.id,
                from: self.state,
                to: next,
            });
        }
        self.state = next;
        Ok(())
    }
}

/// One reported box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackOutput {
    pub id: u64,
    pub bbox: BBox,
    pub s_det: f64,
}

/// One reported box with its frame, as written to result files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRow {
    pub frame: u32,
    pub id: u64,
    pub bbox: BBox,
    pub conf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub frame: u32,
    pub id: u64,
    pub from: TrackState,
    pub to: TrackState,
}

/// Single-sequence tracker. `step` must be called with increasing frames.
#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    tracks: Vec<Track>,
    next_id: u64,
    last_frame: Option<u32>,
    embed_dim: Option<usize>,
    transitions: Option<Vec<Transition>>,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            tracks: Vec::new(),
            next_id: 1,
            last_frame: None,
            embed_dim: None,
            transitions: None,
        })
    }

    /// Keeps a log of every lifecycle transition.
    pub fn with_transition_log(mut self) -> Self {
        self.transitions = Some(Vec::new());
        self
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    /// Live (non-removed) tracks.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn transitions(&self) -> &[Transition] {
        self.transitions.as_deref().unwrap_or(&[])
    }

    fn check_input(&mut self, frame: u32, detections: &[Detection]) -> Result<()> {
        let previous = self.last_frame.unwrap_or(0);
        if frame <= previous {
            return Err(Error::FrameOrder { previous, got: frame });
        }
        for d in detections {
            if d.frame != frame {
                return Err(Error::FrameOrder {
                    previous: frame,
                    got: d.frame,
                });
            }
            if let Some(e) = &d.embedding {
                let expected = *self.embed_dim.get_or_insert(e.dim());
                if expected != e.dim() {
                    return Err(Error::DimensionMismatch {
                        expected,
                        found: e.dim(),
                    });
                }
            }
        }
        Ok(())
    }

    fn set_state(&mut self, idx: usize, next: TrackState, frame: u32) -> Result<()> {
        let track = &mut self.tracks[idx];
        let from = track.state;
        track.transition(next)?;
        if let Some(log) = &mut self.transitions {
            log.push(Transition {
                frame,
                id: track.id,
                from,
                to: next,
            });
        }
        Ok(())
    }

    fn noise_scale(&self, track: &Track) -> f64 {
        match self.cfg.noise_scaling {
            NoiseScaling::Preset => 1.0,
            NoiseScaling::Adaptive => adaptive_factor(
                track.last_s_det,
                track.n_lost,
                self.cfg.noise.n_max,
                self.cfg.noise.th_det,
            ),
            NoiseScaling::InverseConfidence => 1.0 / track.last_s_det.max(1e-3),
        }
    }

    /// Processes one frame and returns the confirmed tracks' boxes, ordered
    /// by id.
    pub fn step(&mut self, frame: u32, detections: &[Detection]) -> Result<Vec<TrackOutput>> {
        self.check_input(frame, detections)?;
        let first_frame = self.last_frame.is_none();
        self.last_frame = Some(frame);
        let cfg = self.cfg;

        for t in &mut self.tracks {
            t.kf = predict(&t.kf, &cfg.noise);
        }

        let snapshots: Vec<TrackSnapshot> = self
            .tracks
            .iter()
            .map(|t| TrackSnapshot {
                state: t.state,
                bbox: t.bbox(),
                feature: t.feature.clone(),
            })
            .collect();
        let outcome = run_cascade(detections, &snapshots, &cfg.cascade, cfg.weighting());

        for m in &outcome.matches {
            let det = &detections[m.detection];
            let idx = m.track;
            {
                let track = &mut self.tracks[idx];
                track.last_s_det = det.s_det();
            }
            let alpha = self.noise_scale(&self.tracks[idx]);
            let track = &mut self.tracks[idx];
            track.kf = update(&track.kf, &det.bbox, alpha, &cfg.noise)?;
            if let Some(new) = &det.embedding {
                track.feature = Some(match &track.feature {
                    None => new.clone(),
                    Some(prev) => {
                        let a = select_alpha(det, &cfg.feature);
                        let blend = update_feature(prev, new, a)?;
                        if blend == crate::appearance::FeatureBlend::Degenerate {
                            log::warn!("track {}: degenerate feature blend at frame {frame}", track.id);
                        }
                        blend.into_feature(prev)
                    }
                });
            }
            track.hits += 1;
            match track.state {
                TrackState::Lost => {
                    track.n_lost = 0;
                    self.set_state(idx, TrackState::Tracked, frame)?;
                }
                TrackState::New if track.hits >= cfg.n_init => {
                    self.set_state(idx, TrackState::Tracked, frame)?;
                }
                _ => {}
            }
        }

        for &idx in &outcome.unmatched_tracks {
            match self.tracks[idx].state {
                TrackState::Tracked => {
                    self.tracks[idx].n_lost = 1;
                    self.set_state(idx, TrackState::Lost, frame)?;
                }
                TrackState::Lost => {
                    self.tracks[idx].n_lost += 1;
                    if self.tracks[idx].n_lost > cfg.noise.n_max {
                        self.set_state(idx, TrackState::Removed, frame)?;
                    }
                }
                TrackState::New => self.set_state(idx, TrackState::Removed, frame)?,
                TrackState::Removed => {}
            }
        }
        self.tracks.retain(|t| t.state != TrackState::Removed);

        for &i in &outcome.unmatched_detections {
            let det = &detections[i];
            if det.s_det() < cfg.cascade.th_high {
                continue;
            }
            let id = self.next_id;
            self.next_id += 1;
            // tracks born on the first frame have no chance to be confirmed
            // by a second match before they are reported
            let state = if first_frame {
                TrackState::Tracked
            } else {
                TrackState::New
            };
            self.tracks.push(Track {
                id,
                state,
                kf: KalmanState::initiate(&det.bbox, &cfg.noise),
                feature: det.embedding.clone(),
                n_lost: 0,
                hits: 0,
                last_s_det: det.s_det(),
                start_frame: frame,
            });
        }

        let mut out: Vec<TrackOutput> = self
            .tracks
            .iter()
            .filter(|t| t.state == TrackState::Tracked)
            .map(|t| TrackOutput {
                id: t.id,
                bbox: t.bbox(),
                s_det: t.last_s_det,
            })
            .collect();
        out.sort_by_key(|o| o.id);
        Ok(out)
    }
}

/// Runs a fresh tracker over a frame-ordered stream. Frames missing from the
/// stream between its first and last frame are processed as empty.
pub fn run_sequence(stream: &[FrameDetections], cfg: &TrackerConfig) -> Result<Vec<TrackRow>> {
    let mut tracker = Tracker::new(*cfg)?;
    run_with(&mut tracker, stream)
}

/// Same as [`run_sequence`] on a caller-owned tracker.
pub fn run_with(tracker: &mut Tracker, stream: &[FrameDetections]) -> Result<Vec<TrackRow>> {
    let mut rows = Vec::new();
    let Some(first) = stream.first() else {
        return Ok(rows);
    };
    let mut next_frame = first.frame;
    for batch in stream {
        if batch.frame < next_frame {
            return Err(Error::FrameOrder {
                previous: next_frame - 1,
                got: batch.frame,
            });
        }
        while next_frame < batch.frame {
            emit(&mut rows, next_frame, tracker.step(next_frame, &[])?);
            next_frame += 1;
        }
        emit(&mut rows, batch.frame, tracker.step(batch.frame, &batch.detections)?);
        next_frame = batch.frame + 1;
    }
    Ok(rows)
}

fn emit(rows: &mut Vec<TrackRow>, frame: u32, outputs: Vec<TrackOutput>) {
    rows.extend(outputs.into_iter().map(|o| TrackRow {
        frame,
        id: o.id,
        bbox: o.bbox,
        conf: o.s_det,
    }));
}
