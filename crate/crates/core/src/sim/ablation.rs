//! Toggle-grid comparison over seeded scenes.

use rayon::prelude::*;

use crate::appearance::FeatureMode;
use crate::error::Result;
use crate::io::detections::quantize;
use crate::io::results::{LabeledBox, RESULT_DECIMALS};
use crate::tracker::{run_sequence, NoiseScaling, TrackRow, TrackerConfig};

use super::metrics::{evaluate, MetricsReport, DEFAULT_IOU_THRESHOLD};
use super::scenario::{simulate, ScenarioSpec};

/// One configuration of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub name: String,
    pub config: TrackerConfig,
}

/// The eight on/off combinations of adaptive noise, weighted cost and SDA
/// (EMA when off), then the inverse-confidence noise row and the DA row.
pub fn standard_variants() -> Vec<Variant> {
    let mut out = Vec::new();
    for bits in 0..8u8 {
        let (acmn, acm, sda) = (bits & 4 != 0, bits & 2 != 0, bits & 1 != 0);
        let mut cfg = TrackerConfig::baseline();
        cfg.set_acmn(acmn);
        cfg.acm_enabled = acm;
        cfg.feature.mode = if sda { FeatureMode::Sda } else { FeatureMode::Ema };
        let name = match bits {
            0 => "baseline".to_string(),
            7 => "all".to_string(),
            _ => [("acmn", acmn), ("acm", acm), ("sda", sda)]
                .iter()
                .filter(|(_, on)| *on)
                .map(|(n, _)| *n)
                .collect::<Vec<_>>()
                .join("+"),
        };
        out.push(Variant { name, config: cfg });
    }
    out.push(Variant {
        name: "inverse-conf".into(),
        config: TrackerConfig {
            noise_scaling: NoiseScaling::InverseConfidence,
            ..TrackerConfig::default()
        },
    });
    let mut da = TrackerConfig::default();
    da.feature.mode = FeatureMode::Da;
    out.push(Variant {
        name: "da".into(),
        config: da,
    });
    out
}

/// Seed-averaged metrics of one variant.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: Variant,
    pub mota: f64,
    pub idf1: f64,
    pub idsw: f64,
    pub fp: f64,
    pub fn_: f64,
    pub per_seed: Vec<MetricsReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

/// Rounds tracker output the way the result writer does, so in-memory
/// scores equal scores of the written file.
pub fn as_written(rows: &[TrackRow]) -> Vec<LabeledBox> {
    rows.iter()
        .map(|r| {
            let mut b = LabeledBox::from(r);
            let q = |v: f64| quantize(v, RESULT_DECIMALS);
            b.bbox.x = q(b.bbox.x);
            b.bbox.y = q(b.bbox.y);
            b.bbox.w = q(b.bbox.w);
            b.bbox.h = q(b.bbox.h);
            b
        })
        .collect()
}

/// Tracks one scene with `cfg` and scores it.
pub fn score(spec: &ScenarioSpec, cfg: &TrackerConfig) -> Result<MetricsReport> {
    let scene = simulate(spec)?;
    let rows = run_sequence(&scene.detections, cfg)?;
    evaluate(&as_written(&rows), &scene.ground_truth, DEFAULT_IOU_THRESHOLD)
}

/// Runs every (variant, scene) cell in parallel; results are collected in
/// input order.
pub fn ablate(scenes: &[ScenarioSpec], variants: &[Variant]) -> Result<AblationTable> {
    let generated = scenes.par_iter().map(simulate).collect::<Result<Vec<_>>>()?;
    let cells: Vec<(usize, usize)> = (0..variants.len())
        .flat_map(|v| (0..generated.len()).map(move |s| (v, s)))
        .collect();
    let reports = cells
        .par_iter()
        .map(|&(v, s)| {
            let scene = &generated[s];
            let rows = run_sequence(&scene.detections, &variants[v].config)?;
            evaluate(&as_written(&rows), &scene.ground_truth, DEFAULT_IOU_THRESHOLD)
        })
        .collect::<Result<Vec<_>>>()?;

    let n = generated.len().max(1) as f64;
    let rows = variants
        .iter()
        .enumerate()
        .map(|(v, variant)| {
            let per_seed = reports[v * generated.len()..(v + 1) * generated.len()].to_vec();
            let mean = |f: fn(&MetricsReport) -> f64| per_seed.iter().map(f).sum::<f64>() / n;
            AblationRow {
                variant: variant.clone(),
                mota: mean(|r| r.mota),
                idf1: mean(|r| r.idf1),
                idsw: mean(|r| r.idsw as f64),
                fp: mean(|r| r.fp as f64),
                fn_: mean(|r| r.fn_ as f64),
                per_seed,
            }
        })
        .collect();
    let table = AblationTable { rows };
    if let Some(w) = table.idsw_warning() {
        log::warn!("{w}");
    }
    Ok(table)
}

impl AblationTable {
    pub fn row(&self, name: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant.name == name)
    }

    /// A message when the all-on row switches identities more often than the
    /// baseline on average.
    pub fn idsw_warning(&self) -> Option<String> {
        let (all, base) = (self.row("all")?, self.row("baseline")?);
        (all.idsw > base.idsw).then(|| {
            format!(
                "all-on mean IDSW {:.2} exceeds baseline mean IDSW {:.2}",
                all.idsw, base.idsw
            )
        })
    }

    /// Tab-separated table with a header row.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("variant\tacmn\tacm\tfeature\tnoise\tmota\tidf1\tidsw\tfp\tfn\n");
        for r in &self.rows {
            let c = &r.variant.config;
            let noise = match c.noise_scaling {
                NoiseScaling::Preset => "preset",
                NoiseScaling::Adaptive => "adaptive",
                NoiseScaling::InverseConfidence => "inverse",
            };
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{:.4}\t{:.4}\t{:.2}\t{:.2}\t{:.2}\n",
                r.variant.name,
                u8::from(c.acmn_enabled()),
                u8::from(c.acm_enabled),
                c.feature.mode,
                noise,
                r.mota,
                r.idf1,
                r.idsw,
                r.fp,
                r.fn_
            ));
        }
        s
    }
}
