use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Detector scores for one box: overall, classification and localization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceTriple {
    pub s_det: f64,
    pub s_cls: f64,
    pub s_loc: f64,
}

impl ConfidenceTriple {
    pub fn new(s_det: f64, s_cls: f64, s_loc: f64) -> Result<Self> {
        for (name, value) in [("s_det", s_det), ("s_cls", s_cls), ("s_loc", s_loc)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidConfidence { name, value });
            }
        }
        Ok(Self { s_det, s_cls, s_loc })
    }

    /// All three scores equal to one.
    pub const fn certain() -> Self {
        Self {
            s_det: 1.0,
            s_cls: 1.0,
            s_loc: 1.0,
        }
    }
}

/// One observation on one frame (frames are 1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame: u32,
    pub bbox: BBox,
    pub conf: ConfidenceTriple,
    pub embedding: Option<Embedding>,
}

impl Detection {
    pub fn new(
        frame: u32,
        bbox: BBox,
        conf: ConfidenceTriple,
        embedding: Option<Embedding>,
    ) -> Result<Self> {
        if frame == 0 {
            return Err(Error::InvalidConfig("detection frame numbers start at 1".into()));
        }
        Ok(Self {
            frame,
            bbox,
            conf,
            embedding,
        })
    }

    pub fn s_det(&self) -> f64 {
        self.conf.s_det
    }
}

/// All detections of one frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameDetections {
    pub frame: u32,
    pub detections: Vec<Detection>,
}

/// Groups frame-ordered detections by frame number.
pub fn group_by_frame(detections: Vec<Detection>) -> Vec<FrameDetections> {
    let mut out: Vec<FrameDetections> = Vec::new();
    for d in detections {
        match out.last_mut() {
            Some(last) if last.frame == d.frame => last.detections.push(d),
            _ => out.push(FrameDetections {
                frame: d.frame,
                detections: vec![d],
            }),
        }
    }
    out
}
