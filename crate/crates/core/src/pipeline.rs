//! End-to-end auto-labeling over a sequence of frames.

use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::flow::{fit_ground, remove_ground, sequence_flow, speed_mask, FlowField, GroundModel};
use crate::frame::Frame;
use crate::geometry::{Box7, Point3};
use crate::proposals::{propose_boxes, st_cluster, Proposal};
use crate::semantics::{
    assign_box_category, assign_point_categories, background_mask, pca_fit, BackgroundMask, EmbeddingSet, PcaModel,
    PointCategory, TextQuery,
};
use crate::tracking::{amodalize, cleanup_labels, register_track, track_proposals, LabeledBox, Track};

/// Ground split of one frame.
#[derive(Debug, Clone)]
pub struct GroundSplit {
    /// `true` for points kept (above the ground).
    pub keep: Vec<bool>,
    /// `None` when no plane could be fitted; then every point is kept.
    pub model: Option<GroundModel>,
}

pub fn split_ground(frame: &Frame, cfg: &PipelineConfig) -> GroundSplit {
    match fit_ground(&frame.points, &cfg.ground_params()) {
        Ok(model) => GroundSplit {
            keep: remove_ground(&frame.points, &model),
            model: Some(model),
        },
        Err(_) => GroundSplit {
            keep: vec![true; frame.len()],
            model: None,
        },
    }
}

fn select_points(points: &[Point3], mask: &[bool]) -> Vec<Point3> {
    points.iter().zip(mask).filter(|(_, k)| **k).map(|(p, _)| *p).collect()
}

/// Scene flow for every point of every frame (ground points get zero).
pub fn compute_flow(frames: &[Frame], dt: f64, cfg: &PipelineConfig) -> Result<Vec<FlowField>> {
    let splits: Vec<GroundSplit> = frames.par_iter().map(|f| split_ground(f, cfg)).collect();
    let above: Vec<Vec<Point3>> = frames
        .iter()
        .zip(&splits)
        .map(|(f, s)| select_points(&f.points, &s.keep))
        .collect();
    let flows = nonground_flow(&above, dt, cfg)?;
    Ok(flows.iter().zip(&splits).map(|(fl, s)| fl.expand(&s.keep)).collect())
}

fn nonground_flow(above: &[Vec<Point3>], dt: f64, cfg: &PipelineConfig) -> Result<Vec<FlowField>> {
    if above.len() < 2 {
        return Ok(above.iter().map(|p| FlowField::zeros(p.len(), dt)).collect());
    }
    let refs: Vec<&[Point3]> = above.iter().map(|v| v.as_slice()).collect();
    sequence_flow(&refs, dt, &cfg.flow_params())
}

/// Background queries named in the config, in config order.
pub fn select_background<'a>(available: &'a [TextQuery], cfg: &PipelineConfig) -> Vec<&'a TextQuery> {
    cfg.background_categories
        .iter()
        .filter_map(|name| available.iter().find(|q| &q.category == name))
        .collect()
}

/// Optional PCA over all frame features; queries are mapped with the same model.
pub fn fit_feature_pca(frames: &[Frame], cfg: &PipelineConfig) -> Result<Option<PcaModel>> {
    if !cfg.pca_enabled {
        return Ok(None);
    }
    let Some(dim) = frames.iter().find_map(|f| f.embeddings.as_ref().map(|e| e.dim())) else {
        return Ok(None);
    };
    let rows = frames.iter().filter_map(|f| f.embeddings.as_ref()).flat_map(|e| e.rows());
    let k = cfg.pca_k.min(dim);
    Ok(Some(pca_fit(rows, dim, k)?))
}

#[derive(Debug, Clone)]
pub struct AutolabelOutput {
    /// Amodal boxes after cleanup, sorted by `(frame, track_id)`.
    pub labels: Vec<LabeledBox>,
    /// All tracks, including those too short to be labeled.
    pub tracks: Vec<Track>,
    /// Per frame, the original indices of the points that survived ground
    /// removal and the speed filter; their features are the label features.
    pub kept_points: Vec<Vec<usize>>,
}

impl AutolabelOutput {
    pub fn track_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.labels.iter().map(|l| l.track_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

struct Prepared {
    points: Vec<Point3>,
    original: Vec<usize>,
    flow: FlowField,
    bg: BackgroundMask,
    emb: Option<EmbeddingSet>,
    ground: Option<GroundModel>,
}

/// Flow, masks, clustering, tracking, amodal boxes and cleanup.
///
/// Frame flow is used when present, otherwise estimated. `background`
/// supplies embeddings for the configured background categories.
pub fn run_autolabel(
    frames: &[Frame],
    background: &[TextQuery],
    dt: f64,
    cfg: &PipelineConfig,
) -> Result<AutolabelOutput> {
    cfg.validate()?;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter("dt must be positive".into()));
    }
    let use_bg = cfg.background_filter;
    if use_bg && frames.iter().any(|f| f.embeddings.is_none()) {
        return Err(Error::Pipeline(
            "background filtering needs per-point features; supply embeddings (or camera feature maps) or set background_filter = false"
                .into(),
        ));
    }
    let pca = fit_feature_pca(frames, cfg)?;
    let bg_queries: Vec<TextQuery> = if use_bg {
        let sel = select_background(background, cfg);
        if sel.is_empty() {
            return Err(Error::Pipeline("no embeddings for the configured background categories".into()));
        }
        sel.into_iter()
            .map(|q| match &pca {
                Some(m) => m.transform_query(q),
                None => Ok(q.clone()),
            })
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    let splits: Vec<GroundSplit> = frames.par_iter().map(|f| split_ground(f, cfg)).collect();
    let above: Vec<Vec<Point3>> = frames
        .iter()
        .zip(&splits)
        .map(|(f, s)| select_points(&f.points, &s.keep))
        .collect();
    let flows: Vec<FlowField> = if frames.iter().all(|f| f.flow.is_some()) {
        frames
            .iter()
            .zip(&splits)
            .map(|(f, s)| f.flow.as_ref().expect("checked").select(&s.keep))
            .collect()
    } else {
        nonground_flow(&above, dt, cfg)?
    };

    let prepared: Vec<Prepared> = (0..frames.len())
        .into_par_iter()
        .map(|t| -> Result<Prepared> {
            let frame = &frames[t];
            let split = &splits[t];
            let emb = match (&frame.embeddings, &pca) {
                (Some(e), Some(m)) => Some(m.transform_embeddings(&e.select(&split.keep))?),
                (Some(e), None) => Some(e.select(&split.keep)),
                _ => None,
            };
            let bg_full = match (&emb, use_bg) {
                (Some(e), true) => background_mask(e, &bg_queries, cfg.eps_bg)?,
                _ => BackgroundMask(vec![false; above[t].len()]),
            };
            let fast = speed_mask(&flows[t], cfg.eps_sf).0;
            let original_above: Vec<usize> = (0..frame.len()).filter(|&i| split.keep[i]).collect();
            Ok(Prepared {
                points: select_points(&above[t], &fast),
                original: original_above.iter().zip(&fast).filter(|(_, k)| **k).map(|(i, _)| *i).collect(),
                flow: flows[t].select(&fast),
                bg: BackgroundMask(bg_full.0.iter().zip(&fast).filter(|(_, k)| **k).map(|(b, _)| *b).collect()),
                emb: emb.map(|e| e.select(&fast)),
                ground: split.model,
            })
        })
        .collect::<Result<_>>()?;

    let cluster = cfg.cluster_params();
    let proposal = cfg.proposal_params();
    let per_frame: Vec<Vec<Proposal>> = frames
        .par_iter()
        .zip(&prepared)
        .map(|(frame, p)| {
            let emb = if cluster.embedding_weight > 0.0 { p.emb.as_ref() } else { None };
            let labeling = st_cluster(&p.points, Some(&p.flow), emb, &cluster)?;
            propose_boxes(&labeling, &p.points, &p.bg, &p.flow, &proposal, frame.ego_heading())
        })
        .collect::<Result<_>>()?;

    let tracks = track_proposals(&per_frame, &cfg.tracker_params(dt))?;
    let frame_points: Vec<&[Point3]> = prepared.iter().map(|p| p.points.as_slice()).collect();
    let reg = cfg.registration_params(dt);
    let amodal = cfg.amodal_params();
    let boxes: Vec<Vec<LabeledBox>> = tracks
        .par_iter()
        .filter(|t| t.len() >= cfg.min_track_length)
        .map(|track| {
            let shape = register_track(track, &frame_points, &reg)?;
            let first = track.observations[0].frame;
            amodalize(
                track,
                &shape,
                &amodal,
                frames[first].ego_heading(),
                prepared[first].ground.as_ref(),
            )
        })
        .collect::<Result<_>>()?;
    let all: Vec<LabeledBox> = boxes.into_iter().flatten().collect();
    let labels = cleanup_labels(&all, &cfg.cleanup_params())?;

    Ok(AutolabelOutput {
        labels,
        tracks,
        kept_points: prepared.into_iter().map(|p| p.original).collect(),
    })
}

/// Category index (into `queries`) per `(frame, box)` by majority vote of
/// the enclosed points.
///
/// Background queries, when given, take part in the per-point vote; points
/// that prefer a background category do not vote for any object category.
pub fn categorize_boxes(
    boxes: &[(usize, Box7)],
    frames: &[Frame],
    queries: &[TextQuery],
    background: &[TextQuery],
) -> Result<Vec<Option<usize>>> {
    if queries.is_empty() {
        return Err(Error::EmptyQueries);
    }
    if let Some(&(f, _)) = boxes.iter().find(|(f, _)| *f >= frames.len()) {
        return Err(Error::Pipeline(format!(
            "box references frame {f} but the sequence has {} frames",
            frames.len()
        )));
    }
    let all: Vec<TextQuery> = queries.iter().chain(background).cloned().collect();
    let votes: Vec<Vec<PointCategory>> = frames
        .par_iter()
        .map(|f| {
            let emb = f
                .embeddings
                .as_ref()
                .ok_or_else(|| Error::Pipeline(format!("frame {} has no point features", f.index)))?;
            let mut cats = assign_point_categories(emb, &all)?;
            for c in &mut cats {
                if c.category.is_some_and(|k| k >= queries.len()) {
                    c.category = None;
                }
            }
            Ok(cats)
        })
        .collect::<Result<_>>()?;
    Ok(boxes
        .iter()
        .map(|(f, b)| assign_box_category(b, &frames[*f].points, &votes[*f]))
        .collect())
}
