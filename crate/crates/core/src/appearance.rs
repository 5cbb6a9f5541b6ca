//! Track appearance smoothing: fixed EMA, detection-confidence driven (DA)
//! and classification/localization driven (SDA) blending factors.
//!
//! The factor `alpha` is the weight kept on the previous feature, so
//! `alpha = 1` leaves the track feature untouched. Both dynamic rules clamp
//! their bracket terms to `[0, 1]`; detections below a threshold therefore
//! contribute nothing.

use crate::detection::Detection;
use crate::embedding::Embedding;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureMode {
    Ema,
    Da,
    #[default]
    Sda,
}

impl std::str::FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ema" => Ok(Self::Ema),
            "da" => Ok(Self::Da),
            "sda" => Ok(Self::Sda),
            other => Err(Error::InvalidConfig(format!(
                "unknown feature mode {other:?} (expected ema, da or sda)"
            ))),
        }
    }
}

impl std::fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Ema => "ema",
            Self::Da => "da",
            Self::Sda => "sda",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureUpdatePolicy {
    pub mode: FeatureMode,
    pub alpha_ema: f64,
    /// Floor of the dynamic factors, reached at full confidence.
    pub c: f64,
    pub th_det: f64,
    pub th_cls: f64,
    pub th_loc: f64,
}

impl Default for FeatureUpdatePolicy {
    fn default() -> Self {
        Self {
            mode: FeatureMode::Sda,
            alpha_ema: 0.9,
            c: 0.95,
            th_det: 0.6,
            th_cls: 0.75,
            th_loc: 0.55,
        }
    }
}

impl FeatureUpdatePolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(Error::InvalidConfig(format!("c must lie in (0, 1), got {}", self.c)));
        }
        for (name, v) in [("th_det", self.th_det), ("th_cls", self.th_cls), ("th_loc", self.th_loc)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.alpha_ema) {
            return Err(Error::InvalidConfig(format!(
                "alpha_ema must lie in [0, 1], got {}",
                self.alpha_ema
            )));
        }
        Ok(())
    }

    /// Weight of the classification term, `4(1 - c)/5`.
    pub fn c_cls(&self) -> f64 {
        4.0 * (1.0 - self.c) / 5.0
    }

    /// Weight of the localization term, `(1 - c)/5`.
    pub fn c_loc(&self) -> f64 {
        (1.0 - self.c) / 5.0
    }
}

/// `1 - (s - th)/(1 - th)` clamped to `[0, 1]`.
fn shortfall(s: f64, th: f64) -> f64 {
    (1.0 - (s - th) / (1.0 - th)).clamp(0.0, 1.0)
}

pub fn alpha_da(s_det: f64, policy: &FeatureUpdatePolicy) -> f64 {
    policy.c + (1.0 - policy.c) * shortfall(s_det, policy.th_det)
}

pub fn alpha_sda(s_cls: f64, s_loc: f64, policy: &FeatureUpdatePolicy) -> f64 {
    policy.c
        + policy.c_cls() * shortfall(s_cls, policy.th_cls)
        + policy.c_loc() * shortfall(s_loc, policy.th_loc)
}

pub fn select_alpha(det: &Detection, policy: &FeatureUpdatePolicy) -> f64 {
    match policy.mode {
        FeatureMode::Ema => policy.alpha_ema,
        FeatureMode::Da => alpha_da(det.conf.s_det, policy),
        FeatureMode::Sda => alpha_sda(det.conf.s_cls, det.conf.s_loc, policy),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureBlend {
    Updated(Embedding),
    /// `alpha == 1`: nothing to do.
    Unchanged,
    /// The blend cancelled out; the previous feature stays.
    Degenerate,
}

impl FeatureBlend {
    /// Resolves the outcome against the previous feature.
    pub fn into_feature(self, prev: &Embedding) -> Embedding {
        match self {
            Self::Updated(e) => e,
            Self::Unchanged | Self::Degenerate => prev.clone(),
        }
    }
}

/// Renormalized blend `alpha * prev + (1 - alpha) * new`.
pub fn update_feature(prev: &Embedding, new: &Embedding, alpha: f64) -> Result<FeatureBlend> {
    if prev.dim() != new.dim() {
        return Err(Error::DimensionMismatch {
            expected: prev.dim(),
            found: new.dim(),
        });
    }
    if alpha >= 1.0 {
        return Ok(FeatureBlend::Unchanged);
    }
    let blended: Vec<f64> = prev
        .as_slice()
        .iter()
        .zip(new.as_slice())
        .map(|(p, n)| alpha * p + (1.0 - alpha) * n)
        .collect();
    let norm = blended.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= 1e-12 {
        return Ok(FeatureBlend::Degenerate);
    }
    match crate::embedding::normalize(&blended) {
        Ok(e) => Ok(FeatureBlend::Updated(e)),
        Err(_) => Ok(FeatureBlend::Degenerate),
    }
}
