//! CLEAR-MOT (MOTA, FP, FN, IDSW) and IDF1 scoring.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::assignment::{solve_assignment, CostMatrix};
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::io::results::LabeledBox;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// Cost given to pairs below the IoU threshold; larger than any sum of
/// valid costs so the solver maximizes the number of valid pairs first.
const INVALID: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsReport {
    pub mota: f64,
    pub idf1: f64,
    pub idsw: usize,
    pub fp: usize,
    pub fn_: usize,
    pub gt_count: usize,
}

impl MetricsReport {
    fn from_counts(fp: usize, fn_: usize, idsw: usize, gt_count: usize, idf1: f64) -> Self {
        Self {
            mota: 1.0 - (fn_ + fp + idsw) as f64 / gt_count as f64,
            idf1,
            idsw,
            fp,
            fn_,
            gt_count,
        }
    }
}

type Frames<'a> = BTreeMap<u32, Vec<&'a LabeledBox>>;

fn by_frame(rows: &[LabeledBox]) -> Frames<'_> {
    let mut m: Frames = BTreeMap::new();
    for r in rows {
        m.entry(r.frame).or_default().push(r);
    }
    for v in m.values_mut() {
        v.sort_by_key(|r| r.id);
    }
    m
}

fn check_ids(rows: &[LabeledBox], what: &str) -> Result<()> {
    let mut seen = BTreeSet::new();
    for r in rows {
        if !seen.insert((r.frame, r.id)) {
            return Err(Error::Evaluation(format!(
                "{what} id {} appears twice on frame {}",
                r.id, r.frame
            )));
        }
    }
    Ok(())
}

/// Minimum-cost pairing of `gt` and `hyp` boxes with IoU at or above
/// `threshold`, maximizing the pair count first.
fn match_frame(gt: &[BBox], hyp: &[BBox], threshold: f64) -> Vec<(usize, usize)> {
    let costs = CostMatrix::from_fn(gt.len(), hyp.len(), |i, j| {
        let v = iou(&gt[i], &hyp[j]);
        if v >= threshold {
            1.0 - v
        } else {
            INVALID
        }
    });
    let mut out: Vec<(usize, usize)> = solve_assignment(&costs, INVALID / 2.0)
        .matches
        .into_iter()
        .collect();
    out.sort_unstable();
    out
}

/// Scores `results` against `ground_truth`. Result frames past the last
/// ground-truth frame are an error, as is empty ground truth.
pub fn evaluate(results: &[LabeledBox], ground_truth: &[LabeledBox], iou_threshold: f64) -> Result<MetricsReport> {
    if !(iou_threshold > 0.0 && iou_threshold <= 1.0) {
        return Err(Error::Evaluation(format!("IoU threshold {iou_threshold} outside (0, 1]")));
    }
    if ground_truth.is_empty() {
        return Err(Error::Evaluation("ground truth is empty".into()));
    }
    check_ids(results, "result")?;
    check_ids(ground_truth, "ground-truth")?;
    let last_gt = ground_truth.iter().map(|r| r.frame).max().unwrap_or(0);
    if let Some(r) = results.iter().find(|r| r.frame > last_gt) {
        return Err(Error::Evaluation(format!(
            "result frame {} is past the last ground-truth frame {last_gt}",
            r.frame
        )));
    }

    let gt_frames = by_frame(ground_truth);
    let hyp_frames = by_frame(results);
    let empty = Vec::new();
    let frames: BTreeSet<u32> = gt_frames.keys().chain(hyp_frames.keys()).copied().collect();

    let (mut fp, mut fn_, mut idsw) = (0, 0, 0);
    let mut last: HashMap<u64, u64> = HashMap::new();
    for f in frames {
        let g = gt_frames.get(&f).unwrap_or(&empty);
        let h = hyp_frames.get(&f).unwrap_or(&empty);
        let mut g_used = vec![false; g.len()];
        let mut h_used = vec![false; h.len()];
        let mut matched = 0;

        // keep last pairings that are still valid
        for (i, gr) in g.iter().enumerate() {
            let Some(&hid) = last.get(&gr.id) else { continue };
            if let Some(j) = h.iter().position(|hr| hr.id == hid) {
                if !h_used[j] && iou(&gr.bbox, &h[j].bbox) >= iou_threshold {
                    g_used[i] = true;
                    h_used[j] = true;
                    matched += 1;
                }
            }
        }

        let gi: Vec<usize> = (0..g.len()).filter(|&i| !g_used[i]).collect();
        let hj: Vec<usize> = (0..h.len()).filter(|&j| !h_used[j]).collect();
        let gb: Vec<BBox> = gi.iter().map(|&i| g[i].bbox).collect();
        let hb: Vec<BBox> = hj.iter().map(|&j| h[j].bbox).collect();
        for (a, b) in match_frame(&gb, &hb, iou_threshold) {
            let (gid, hid) = (g[gi[a]].id, h[hj[b]].id);
            if last.get(&gid).is_some_and(|&prev| prev != hid) {
                idsw += 1;
            }
            last.insert(gid, hid);
            matched += 1;
        }
        fp += h.len() - matched;
        fn_ += g.len() - matched;
    }

    let idf1 = idf1(results, ground_truth, iou_threshold);
    Ok(MetricsReport::from_counts(fp, fn_, idsw, ground_truth.len(), idf1))
}

type Overlaps = (Vec<u64>, Vec<u64>, HashMap<(u64, u64), usize>);

/// Overlap counts between every (gt id, result id) pair.
fn overlap_counts(results: &[LabeledBox], ground_truth: &[LabeledBox], iou_threshold: f64) -> Overlaps {
    let gt_frames = by_frame(ground_truth);
    let hyp_frames = by_frame(results);
    let mut counts = HashMap::new();
    for (f, g) in &gt_frames {
        let Some(h) = hyp_frames.get(f) else { continue };
        for gr in g {
            for hr in h {
                if iou(&gr.bbox, &hr.bbox) >= iou_threshold {
                    *counts.entry((gr.id, hr.id)).or_insert(0) += 1;
                }
            }
        }
    }
    let gt_ids: Vec<u64> = ground_truth.iter().map(|r| r.id).collect::<BTreeSet<_>>().into_iter().collect();
    let hyp_ids: Vec<u64> = results.iter().map(|r| r.id).collect::<BTreeSet<_>>().into_iter().collect();
    (gt_ids, hyp_ids, counts)
}

fn idf1(results: &[LabeledBox], ground_truth: &[LabeledBox], iou_threshold: f64) -> f64 {
    let total = results.len() + ground_truth.len();
    if total == 0 {
        return 1.0;
    }
    let (gt_ids, hyp_ids, counts) = overlap_counts(results, ground_truth, iou_threshold);
    let max = counts.values().copied().max().unwrap_or(0) as f64;
    let costs = CostMatrix::from_fn(gt_ids.len(), hyp_ids.len(), |i, j| {
        max - counts.get(&(gt_ids[i], hyp_ids[j])).copied().unwrap_or(0) as f64
    });
    let idtp: usize = solve_assignment(&costs, f64::INFINITY)
        .matches
        .iter()
        .map(|&(i, j)| counts.get(&(gt_ids[i], hyp_ids[j])).copied().unwrap_or(0))
        .sum();
    2.0 * idtp as f64 / total as f64
}
