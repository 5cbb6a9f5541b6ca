//! Seeded synthetic scenes: boxes moving through an arena, scripted
//! occlusion windows, and detections whose confidences drop with occlusion.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::detection::{ConfidenceTriple, Detection, FrameDetections};
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::io::detections::{quantize, write_detections, BOX_DECIMALS, CONF_DECIMALS};
use crate::io::results::{write_ground_truth, LabeledBox, GT_DECIMALS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// One horizontal lane per object, so paths never cross. Objects start in
    /// the half of the arena they move away from.
    Lanes,
    /// Uniform start positions and headings.
    Scattered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arena {
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionModel {
    /// Pixels per frame.
    pub speed_min: f64,
    pub speed_max: f64,
    /// Per-frame positional jitter std, pixels.
    pub jitter_std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeModel {
    pub width_min: f64,
    pub width_max: f64,
    /// Height over width.
    pub aspect: f64,
}

/// Object `object` (0-based) is hidden on frames `start..=end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occlusion {
    pub object: usize,
    pub start: u32,
    pub end: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfModel {
    /// Box jitter std as a fraction of box size.
    pub box_noise_std: f64,
    /// Extra box jitter at full occlusion: std scales by `1 + gain * depth`.
    pub occlusion_noise_gain: f64,
    /// Std of the random loss in classification confidence.
    pub cls_noise_std: f64,
    /// Frames over which occlusion depth ramps up and back down.
    pub ramp_frames: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub n_objects: usize,
    pub frame_count: u32,
    pub arena: Arena,
    pub layout: Layout,
    pub motion: MotionModel,
    pub size: SizeModel,
    #[serde(default)]
    pub occlusions: Vec<Occlusion>,
    pub conf_model: ConfModel,
    pub embed_dim: usize,
    /// Norm of the expected appearance perturbation relative to the unit
    /// embedding (per-component std is this over sqrt(D)).
    pub embed_noise_std: f64,
}

impl ScenarioSpec {
    /// Noise-free lanes without occlusions.
    pub fn easy(seed: u64) -> Self {
        Self {
            seed,
            n_objects: 3,
            frame_count: 100,
            arena: Arena {
                width: 1280.0,
                height: 720.0,
            },
            layout: Layout::Lanes,
            motion: MotionModel {
                speed_min: 1.0,
                speed_max: 4.0,
                jitter_std: 0.0,
            },
            size: SizeModel {
                width_min: 30.0,
                width_max: 60.0,
                aspect: 2.0,
            },
            occlusions: Vec::new(),
            conf_model: ConfModel {
                box_noise_std: 0.0,
                occlusion_noise_gain: 0.0,
                cls_noise_std: 0.0,
                ramp_frames: 0,
            },
            embed_dim: 128,
            embed_noise_std: 0.0,
        }
    }

    /// Crossing paths, jittered boxes, random occlusions and noisy
    /// embeddings. Occlusion windows are drawn from `seed`.
    pub fn hard(seed: u64) -> Self {
        let n_objects = 20;
        let frame_count = 300;
        let occlusions = random_occlusions(seed, n_objects, frame_count, 3, 5, 25);
        Self {
            seed,
            n_objects,
            frame_count,
            arena: Arena {
                width: 960.0,
                height: 540.0,
            },
            layout: Layout::Scattered,
            motion: MotionModel {
                speed_min: 2.0,
                speed_max: 8.0,
                jitter_std: 1.0,
            },
            size: SizeModel {
                width_min: 35.0,
                width_max: 55.0,
                aspect: 2.2,
            },
            occlusions,
            conf_model: ConfModel {
                box_noise_std: 0.08,
                occlusion_noise_gain: 1.5,
                cls_noise_std: 0.2,
                ramp_frames: 4,
            },
            embed_dim: 128,
            embed_noise_std: 0.8,
        }
    }

    /// Lanes with one long occlusion per object and mild noise.
    pub fn occlusion(seed: u64) -> Self {
        let n_objects = 4;
        let frame_count = 150;
        let occlusions = random_occlusions(seed, n_objects, frame_count, 1, 10, 25);
        Self {
            seed,
            n_objects,
            frame_count,
            arena: Arena {
                width: 1280.0,
                height: 720.0,
            },
            layout: Layout::Lanes,
            motion: MotionModel {
                speed_min: 1.0,
                speed_max: 4.0,
                jitter_std: 0.2,
            },
            size: SizeModel {
                width_min: 30.0,
                width_max: 60.0,
                aspect: 2.0,
            },
            occlusions,
            conf_model: ConfModel {
                box_noise_std: 0.02,
                occlusion_noise_gain: 1.0,
                cls_noise_std: 0.05,
                ramp_frames: 2,
            },
            embed_dim: 128,
            embed_noise_std: 0.3,
        }
    }

    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        match name {
            "easy" => Ok(Self::easy(seed)),
            "hard" => Ok(Self::hard(seed)),
            "occlusion" => Ok(Self::occlusion(seed)),
            other => Err(Error::InvalidConfig(format!(
                "unknown preset {other:?} (expected easy, hard or occlusion)"
            ))),
        }
    }

    pub const PRESETS: [&'static str; 3] = ["easy", "hard", "occlusion"];

    /// Parses a TOML scenario description.
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_objects == 0 || self.frame_count == 0 || self.embed_dim == 0 {
            return bad("n_objects, frame_count and embed_dim must be positive".into());
        }
        let a = self.arena;
        let s = self.size;
        if !(s.width_min > 0.0 && s.width_min <= s.width_max && s.aspect > 0.0) {
            return bad("invalid size model".into());
        }
        if !(s.width_max < a.width && s.width_max * s.aspect < a.height) {
            return bad("objects do not fit in the arena".into());
        }
        let m = self.motion;
        if !(m.speed_min >= 0.0 && m.speed_min <= m.speed_max) {
            return bad("invalid speed range".into());
        }
        let c = self.conf_model;
        let stds = [
            m.jitter_std,
            c.box_noise_std,
            c.occlusion_noise_gain,
            c.cls_noise_std,
            self.embed_noise_std,
        ];
        if stds.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("noise parameters must be finite and non-negative".into());
        }
        if self.layout == Layout::Lanes
            && ((self.n_objects as f64) * s.width_max * s.aspect > a.height || 2.0 * s.width_max > a.width)
        {
            return bad("lanes do not fit in the arena".into());
        }
        for o in &self.occlusions {
            if o.object >= self.n_objects || o.start < 1 || o.start > o.end || o.end > self.frame_count {
                return bad(format!("occlusion window {o:?} out of range"));
            }
        }
        Ok(())
    }

    /// Occlusion depth of `object` at `frame`, in [0, 1].
    pub fn occlusion_depth(&self, object: usize, frame: u32) -> f64 {
        let ramp = f64::from(self.conf_model.ramp_frames);
        self.occlusions
            .iter()
            .filter(|o| o.object == object && (o.start..=o.end).contains(&frame))
            .map(|o| {
                let edge = (frame - o.start).min(o.end - frame);
                ((f64::from(edge) + 1.0) / (ramp + 1.0)).min(1.0)
            })
            .fold(0.0, f64::max)
    }
}

fn random_occlusions(seed: u64, n_objects: usize, frame_count: u32, per_object: usize, min_len: u32, max_len: u32) -> Vec<Occlusion> {
    // separate stream so occlusions do not shift the scene draws
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6f63_636c_7573_696f);
    let mut out = Vec::new();
    for object in 0..n_objects {
        for _ in 0..per_object {
            let len = rng.random_range(min_len..=max_len);
            // keep the first frames visible so every object gets a track
            let start = rng.random_range(10..=frame_count - len);
            out.push(Occlusion {
                object,
                start,
                end: start + len - 1,
            });
        }
    }
    out
}

/// Generated ground truth and detections for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    /// Ids are object index + 1.
    pub ground_truth: Vec<LabeledBox>,
    /// One entry per frame, including frames without detections.
    pub detections: Vec<FrameDetections>,
}

impl Scene {
    /// Writes `dets.csv`, `dets.emb` and `gt.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_detections(&dir.join("dets.csv"), &self.detections)?;
        write_ground_truth(&self.ground_truth, &dir.join("gt.csv"))
    }
}

fn gaussian(std: f64) -> Normal<f64> {
    Normal::new(0.0, std).expect("std is finite and non-negative")
}

fn unit_embedding(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let n = gaussian(1.0);
    loop {
        let v: Vec<f64> = (0..dim).map(|_| n.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Normalizes, then rounds through f32 so the values survive the sidecar.
fn f32_embedding(v: &[f64]) -> Result<Embedding> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let q: Vec<f64> = v.iter().map(|x| f64::from((x / norm) as f32)).collect();
    Embedding::from_unit_or_normalize(q)
}

struct Body {
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
    w: f64,
    h: f64,
    appearance: Vec<f64>,
}

fn reflect(pos: &mut f64, vel: &mut f64, size: f64, limit: f64) {
    if *pos < 0.0 {
        *pos = -*pos;
        *vel = vel.abs();
    }
    let max = limit - size;
    if *pos > max {
        *pos = 2.0 * max - *pos;
        *vel = -vel.abs();
    }
    *pos = pos.clamp(0.0, max);
}

/// Runs the scenario. The same spec always yields the same scene.
pub fn simulate(spec: &ScenarioSpec) -> Result<Scene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let a = spec.arena;
    let lane_h = a.height / spec.n_objects as f64;

    let mut bodies: Vec<Body> = (0..spec.n_objects)
        .map(|k| {
            let w = rng.random_range(spec.size.width_min..=spec.size.width_max);
            let h = w * spec.size.aspect;
            let speed = rng.random_range(spec.motion.speed_min..=spec.motion.speed_max);
            let (x, y, vx, vy) = match spec.layout {
                Layout::Lanes => {
                    let y = k as f64 * lane_h + (lane_h - h) / 2.0;
                    // start in the half the object moves away from
                    let half = a.width / 2.0;
                    if rng.random::<bool>() {
                        (rng.random_range(0.0..=half - w), y, speed, 0.0)
                    } else {
                        (rng.random_range(half..=a.width - w), y, -speed, 0.0)
                    }
                }
                Layout::Scattered => {
                    let x = rng.random_range(0.0..=a.width - w);
                    let y = rng.random_range(0.0..=a.height - h);
                    let theta = rng.random_range(0.0..std::f64::consts::TAU);
                    (x, y, speed * theta.cos(), speed * theta.sin())
                }
            };
            let appearance = unit_embedding(&mut rng, spec.embed_dim);
            Body { x, y, vx, vy, w, h, appearance }
        })
        .collect();

    let jitter = gaussian(spec.motion.jitter_std);
    let unit = gaussian(1.0);
    let cls_noise = gaussian(spec.conf_model.cls_noise_std);
    let emb_noise = gaussian(spec.embed_noise_std / (spec.embed_dim as f64).sqrt());
    let cm = spec.conf_model;

    let mut ground_truth = Vec::new();
    let mut detections = Vec::new();
    for frame in 1..=spec.frame_count {
        if frame > 1 {
            for b in &mut bodies {
                b.x += b.vx + jitter.sample(&mut rng);
                b.y += b.vy + jitter.sample(&mut rng);
                reflect(&mut b.x, &mut b.vx, b.w, a.width);
                reflect(&mut b.y, &mut b.vy, b.h, a.height);
            }
        }
        let mut batch = Vec::new();
        for (k, b) in bodies.iter().enumerate() {
            let q = |v: f64| quantize(v, GT_DECIMALS);
            let gt = BBox::new(q(b.x), q(b.y), q(b.w), q(b.h))?;
            ground_truth.push(LabeledBox {
                frame,
                id: k as u64 + 1,
                bbox: gt,
            });

            let depth = spec.occlusion_depth(k, frame);
            // always draw so the stream does not depend on earlier drops
            let drop_draw: f64 = rng.random();
            let noise = cm.box_noise_std * (1.0 + cm.occlusion_noise_gain * depth);
            let dx = noise * b.w * unit.sample(&mut rng);
            let dy = noise * b.h * unit.sample(&mut rng);
            let dw = noise * b.w * unit.sample(&mut rng);
            let dh = noise * b.h * unit.sample(&mut rng);
            let cls_loss = cls_noise.sample(&mut rng).abs();
            let noisy: Vec<f64> = b.appearance.iter().map(|v| v + emb_noise.sample(&mut rng)).collect();
            if depth > 0.0 && drop_draw < depth {
                continue;
            }

            let qb = |v: f64| quantize(v, BOX_DECIMALS);
            let w = qb((b.w + dw).max(1.0));
            let h = qb((b.h + dh).max(1.0));
            let x = qb(b.x + dx);
            let y = qb(b.y + dy);
            let err = (x - gt.x).abs() + (y - gt.y).abs() + (w - gt.w).abs() + (h - gt.h).abs();
            let s_loc = quantize((-err / ((gt.w + gt.h) / 2.0)).exp(), CONF_DECIMALS);
            let s_cls = quantize((1.0 - depth - cls_loss).clamp(0.0, 1.0), CONF_DECIMALS);
            let s_det = quantize(s_cls * s_loc, CONF_DECIMALS);
            batch.push(Detection::new(
                frame,
                BBox::new(x, y, w, h)?,
                ConfidenceTriple::new(s_det, s_cls, s_loc)?,
                Some(f32_embedding(&noisy)?),
            )?);
        }
        detections.push(FrameDetections {
            frame,
            detections: batch,
        });
    }
    Ok(Scene {
        ground_truth,
        detections,
    })
}
