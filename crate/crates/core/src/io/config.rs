//! Plain-text `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key in [`KEYS`]
//! has a default; anything else is rejected.

use std::path::{Path, PathBuf};

use crate::appearance::FeatureMode;
use crate::error::{Error, Result};
use crate::tracker::{NoiseScaling, TrackerConfig};

/// Documented keys with their defaults.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("th_det", "0.6", "detection-confidence threshold of the noise scale and of DA"),
    ("n_max", "30", "frames a lost track is kept before removal"),
    ("sigma_pos", "0.05", "position process-noise std per unit box height"),
    ("sigma_vel", "0.00625", "velocity process-noise std per unit box height"),
    ("sigma_meas", "0.05", "preset measurement-noise std per unit box height"),
    ("th_high", "0.6", "detections at or above this enter the first cascade level"),
    ("th_low", "0.1", "detections below this are discarded"),
    ("iou_min", "0.1", "matches with lower raw IoU are rejected"),
    ("max_cost", "1.4", "matches with higher fused cost are rejected"),
    ("feature_mode", "sda", "appearance update rule: ema, da or sda"),
    ("alpha_ema", "0.9", "fixed factor of the ema rule"),
    ("c", "0.95", "floor of the da/sda factors"),
    ("th_cls", "0.75", "classification-confidence threshold of sda"),
    ("th_loc", "0.55", "localization-confidence threshold of sda"),
    ("n_init", "1", "matches needed to confirm a new track"),
    ("acmn_enabled", "true", "confidence-adaptive measurement noise"),
    ("acm_enabled", "true", "confidence-weighted association cost"),
    ("input", "", "detection CSV path"),
    ("output", "", "result file path"),
];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub tracker: TrackerConfig,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

fn invalid(line: Option<u64>, msg: String) -> Error {
    match line {
        Some(n) => Error::InvalidConfig(format!("line {n}: {msg}")),
        None => Error::InvalidConfig(msg),
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("bad value {value:?} for {key}"))
}

fn boolean(key: &str, value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" | "1" | "on" | "yes" => Ok(true),
        "false" | "0" | "off" | "no" => Ok(false),
        _ => Err(format!("bad boolean {value:?} for {key}")),
    }
}

impl RunConfig {
    /// Sets one key. `line` is only used in error messages.
    fn set(&mut self, key: &str, value: &str, line: Option<u64>) -> Result<()> {
        let t = &mut self.tracker;
        let r: std::result::Result<(), String> = (|| {
            match key {
                "th_det" => {
                    let v = num(key, value)?;
                    t.noise.th_det = v;
                    t.feature.th_det = v;
                }
                "n_max" => t.noise.n_max = num(key, value)?,
                "sigma_pos" => t.noise.sigma_pos = num(key, value)?,
                "sigma_vel" => t.noise.sigma_vel = num(key, value)?,
                "sigma_meas" => t.noise.sigma_meas = num(key, value)?,
                "th_high" => t.cascade.th_high = num(key, value)?,
                "th_low" => t.cascade.th_low = num(key, value)?,
                "iou_min" => t.cascade.iou_min = num(key, value)?,
                "max_cost" => t.cascade.max_cost = num(key, value)?,
                "feature_mode" => {
                    t.feature.mode = value.parse::<FeatureMode>().map_err(|e| e.to_string())?
                }
                "alpha_ema" => t.feature.alpha_ema = num(key, value)?,
                "c" => t.feature.c = num(key, value)?,
                "th_cls" => t.feature.th_cls = num(key, value)?,
                "th_loc" => t.feature.th_loc = num(key, value)?,
                "n_init" => t.n_init = num(key, value)?,
                "acmn_enabled" => t.set_acmn(boolean(key, value)?),
                "acm_enabled" => t.acm_enabled = boolean(key, value)?,
                "input" => self.input = (!value.is_empty()).then(|| PathBuf::from(value)),
                "output" => self.output = (!value.is_empty()).then(|| PathBuf::from(value)),
                _ => return Err(format!("unknown key {key:?}")),
            }
            Ok(())
        })();
        r.map_err(|m| invalid(line, m))
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| invalid(None, format!("expected key=value, got {assignment:?}")))?;
        self.set(k.trim(), v.trim(), None)?;
        self.tracker.validate()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let n = k as u64 + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| invalid(Some(n), format!("expected key = value, got {line:?}")))?;
            cfg.set(key.trim(), value.trim(), Some(n))?;
        }
        cfg.tracker.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Serializes every documented key. The comparison-only noise scaling has
    /// no key and cannot be written.
    pub fn to_config_string(&self) -> Result<String> {
        let t = &self.tracker;
        if t.noise_scaling == NoiseScaling::InverseConfidence {
            return Err(Error::InvalidConfig(
                "inverse-confidence noise scaling has no config key".into(),
            ));
        }
        if t.noise.th_det != t.feature.th_det {
            return Err(Error::InvalidConfig(
                "th_det differs between noise and feature settings".into(),
            ));
        }
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let values = [
            t.noise.th_det.to_string(),
            t.noise.n_max.to_string(),
            t.noise.sigma_pos.to_string(),
            t.noise.sigma_vel.to_string(),
            t.noise.sigma_meas.to_string(),
            t.cascade.th_high.to_string(),
            t.cascade.th_low.to_string(),
            t.cascade.iou_min.to_string(),
            t.cascade.max_cost.to_string(),
            t.feature.mode.to_string(),
            t.feature.alpha_ema.to_string(),
            t.feature.c.to_string(),
            t.feature.th_cls.to_string(),
            t.feature.th_loc.to_string(),
            t.n_init.to_string(),
            t.acmn_enabled().to_string(),
            t.acm_enabled.to_string(),
            path(&self.input),
            path(&self.output),
        ];
        let mut s = String::new();
        for ((key, _, doc), value) in KEYS.iter().zip(values) {
            s.push_str(&format!("# {doc}\n{key} = {value}\n"));
        }
        Ok(s)
    }
}
