//! Detection AP, CLEAR-MOT and the false-positive taxonomy.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::geometry::{iou_3d, Box7, Point3, Pose};
use crate::tracking::min_cost_assignment;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: Box7,
    pub score: f64,
    /// `None` is the class-agnostic sentinel.
    pub category: Option<usize>,
    pub frame: usize,
    pub track_id: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthBox {
    pub bbox: Box7,
    pub category: Option<usize>,
    pub frame: usize,
    pub track_id: usize,
}

/// Ego-centered BEV rectangle, `length` along the ego heading.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub length: f64,
    pub width: f64,
    /// World-to-ego transform per frame; frames past the end use identity.
    world_to_ego: Vec<Pose>,
}

impl Region {
    pub fn new(length: f64, width: f64, ego_poses: &[Pose]) -> Self {
        Self {
            length,
            width,
            world_to_ego: ego_poses.iter().map(Pose::inverse).collect(),
        }
    }

    pub fn contains(&self, frame: usize, center: &Point3) -> bool {
        let p = self
            .world_to_ego
            .get(frame)
            .map_or(*center, |t| t.transform_point(center));
        p.x.abs() <= 0.5 * self.length && p.y.abs() <= 0.5 * self.width
    }
}

/// Detection ranking: score descending, then input order.
fn ranking(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b)));
    order
}

/// Greedy score-ordered matching. Each detection takes the unmatched GT of
/// its frame with the highest IoU, if that IoU reaches the threshold.
/// Returns per-detection TP flags in input order.
fn greedy_match(dets: &[Detection], gts: &[GroundTruthBox], iou_threshold: f64) -> Vec<bool> {
    let mut by_frame: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, g) in gts.iter().enumerate() {
        by_frame.entry(g.frame).or_default().push(i);
    }
    let mut used = vec![false; gts.len()];
    let mut tp = vec![false; dets.len()];
    for d in ranking(dets) {
        let Some(cands) = by_frame.get(&dets[d].frame) else {
            continue;
        };
        let mut best: Option<(usize, f64)> = None;
        for &g in cands {
            if used[g] {
                continue;
            }
            let iou = iou_3d(&dets[d].bbox, &gts[g].bbox);
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        if let Some((g, iou)) = best {
            if iou >= iou_threshold {
                used[g] = true;
                tp[d] = true;
            }
        }
    }
    tp
}

/// Area under the PR curve: the sum of precision at each true positive,
/// weighted by its recall step `1/G`. Returns 0 when there is no GT.
///
/// All inputs are assumed to share one category; `region` filters both
/// sides by box center.
pub fn average_precision(
    dets: &[Detection],
    gts: &[GroundTruthBox],
    iou_threshold: f64,
    region: Option<&Region>,
) -> f64 {
    let inside = |frame: usize, b: &Box7| region.is_none_or(|r| r.contains(frame, &b.center()));
    let dets: Vec<Detection> = dets.iter().filter(|d| inside(d.frame, &d.bbox)).copied().collect();
    let gts: Vec<GroundTruthBox> = gts.iter().filter(|g| inside(g.frame, &g.bbox)).copied().collect();
    if gts.is_empty() {
        return 0.0;
    }
    let tp = greedy_match(&dets, &gts, iou_threshold);
    let mut hits = 0usize;
    let mut ap = 0.0;
    for (rank, d) in ranking(&dets).into_iter().enumerate() {
        if tp[d] {
            hits += 1;
            ap += hits as f64 / (rank + 1) as f64;
        }
    }
    ap / gts.len() as f64
}

/// AP restricted to one category on both sides.
pub fn category_ap(
    dets: &[Detection],
    gts: &[GroundTruthBox],
    category: Option<usize>,
    iou_threshold: f64,
    region: Option<&Region>,
) -> f64 {
    let d: Vec<Detection> = dets.iter().filter(|d| d.category == category).copied().collect();
    let g: Vec<GroundTruthBox> = gts.iter().filter(|g| g.category == category).copied().collect();
    average_precision(&d, &g, iou_threshold, region)
}

pub fn mean_ap(aps: &[f64]) -> Result<f64> {
    if aps.is_empty() {
        return Err(Error::InvalidParameter("mean AP over zero categories".into()));
    }
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotSummary {
    /// `(1 − (misses + fp + switches) / GT) · 100`.
    pub mota: f64,
    /// Mean `(1 − IoU) · 100` over matches; NaN without matches.
    pub motp: f64,
    pub num_gt: usize,
    pub matches: usize,
    pub misses: usize,
    pub false_positives: usize,
    pub id_switches: usize,
}

const UNMATCHABLE: f64 = 1e6;

/// CLEAR-MOT. Hypotheses without a track id each count as their own track.
pub fn clear_mot(hyps: &[Detection], gts: &[GroundTruthBox], match_iou: f64) -> MotSummary {
    let hyp_id = |i: usize| hyps[i].track_id.map_or(usize::MAX - i, |t| t);
    let mut hyp_frames: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut gt_frames: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, h) in hyps.iter().enumerate() {
        hyp_frames.entry(h.frame).or_default().push(i);
    }
    for (i, g) in gts.iter().enumerate() {
        gt_frames.entry(g.frame).or_default().push(i);
    }
    let frames: BTreeSet<usize> = hyp_frames.keys().chain(gt_frames.keys()).copied().collect();

    let mut last: HashMap<usize, usize> = HashMap::new();
    let (mut matches, mut misses, mut fps, mut switches) = (0usize, 0usize, 0usize, 0usize);
    let mut dissimilarity = 0.0;
    let empty = Vec::new();
    for f in frames {
        let hs = hyp_frames.get(&f).unwrap_or(&empty);
        let gs = gt_frames.get(&f).unwrap_or(&empty);
        let iou: Vec<Vec<f64>> = gs
            .iter()
            .map(|&g| hs.iter().map(|&h| iou_3d(&gts[g].bbox, &hyps[h].bbox)).collect())
            .collect();
        let mut gt_match: Vec<Option<usize>> = vec![None; gs.len()];
        let mut hyp_used = vec![false; hs.len()];

        // Keep last frame's correspondences that still overlap enough.
        for (a, &g) in gs.iter().enumerate() {
            let Some(&prev) = last.get(&gts[g].track_id) else {
                continue;
            };
            if let Some(b) = (0..hs.len()).find(|&b| !hyp_used[b] && hyp_id(hs[b]) == prev && iou[a][b] >= match_iou) {
                gt_match[a] = Some(b);
                hyp_used[b] = true;
            }
        }

        let free_g: Vec<usize> = (0..gs.len()).filter(|&a| gt_match[a].is_none()).collect();
        let free_h: Vec<usize> = (0..hs.len()).filter(|&b| !hyp_used[b]).collect();
        let cost: Vec<Vec<f64>> = free_g
            .iter()
            .map(|&a| {
                free_h
                    .iter()
                    .map(|&b| if iou[a][b] >= match_iou { 1.0 - iou[a][b] } else { UNMATCHABLE })
                    .collect()
            })
            .collect();
        for (ra, slot) in min_cost_assignment(&cost).into_iter().enumerate() {
            let Some(cb) = slot else { continue };
            let (a, b) = (free_g[ra], free_h[cb]);
            if iou[a][b] < match_iou {
                continue;
            }
            let gid = gts[gs[a]].track_id;
            if last.get(&gid).is_some_and(|&p| p != hyp_id(hs[b])) {
                switches += 1;
            }
            gt_match[a] = Some(b);
            hyp_used[b] = true;
        }

        for (a, m) in gt_match.iter().enumerate() {
            match m {
                Some(b) => {
                    matches += 1;
                    dissimilarity += 1.0 - iou[a][*b];
                    last.insert(gts[gs[a]].track_id, hyp_id(hs[*b]));
                }
                None => misses += 1,
            }
        }
        fps += hyp_used.iter().filter(|u| !**u).count();
    }
    let errors = (misses + fps + switches) as f64;
    MotSummary {
        mota: (1.0 - errors / gts.len().max(1) as f64) * 100.0,
        motp: if matches == 0 {
            f64::NAN
        } else {
            dissimilarity / matches as f64 * 100.0
        },
        num_gt: gts.len(),
        matches,
        misses,
        false_positives: fps,
        id_switches: switches,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FpTaxonomy {
    pub localization: usize,
    pub confusion_other: usize,
    pub confusion_background: usize,
}

impl FpTaxonomy {
    pub fn total(&self) -> usize {
        self.localization + self.confusion_other + self.confusion_background
    }
}

/// Classifies false positives among the `⌈GT/2⌉` most confident detections
/// of each category.
///
/// A false positive overlapping a same-category GT with IoU above
/// `min_overlap` is a localization error (this includes duplicates of an
/// already matched GT); otherwise IoU `>= min_overlap` with another
/// category's GT is confusion with another object; the rest is background.
pub fn fp_breakdown(dets: &[Detection], gts: &[GroundTruthBox], iou_threshold: f64, min_overlap: f64) -> FpTaxonomy {
    let categories: BTreeSet<Option<usize>> = dets.iter().map(|d| d.category).collect();
    let mut out = FpTaxonomy::default();
    for cat in categories {
        let cd: Vec<Detection> = dets.iter().filter(|d| d.category == cat).copied().collect();
        let cg: Vec<GroundTruthBox> = gts.iter().filter(|g| g.category == cat).copied().collect();
        let top_n = cg.len().div_ceil(2);
        let tp = greedy_match(&cd, &cg, iou_threshold);
        for d in ranking(&cd).into_iter().take(top_n) {
            if tp[d] {
                continue;
            }
            let det = &cd[d];
            let same = gts
                .iter()
                .filter(|g| g.frame == det.frame && g.category == cat)
                .map(|g| iou_3d(&det.bbox, &g.bbox))
                .fold(0.0, f64::max);
            let other = gts
                .iter()
                .filter(|g| g.frame == det.frame && g.category != cat)
                .map(|g| iou_3d(&det.bbox, &g.bbox))
                .fold(0.0, f64::max);
            if same > min_overlap {
                out.localization += 1;
            } else if other >= min_overlap {
                out.confusion_other += 1;
            } else {
                out.confusion_background += 1;
            }
        }
    }
    out
}
