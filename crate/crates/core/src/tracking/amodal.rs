use std::ops::Range;

use crate::error::{Error, Result};
use crate::flow::GroundModel;
use crate::geometry::{fit_tightest_box_with_min, nms_with, Box7, IouKind, Point3, Pose, SpatialIndex, Vector3};
use crate::proposals::assign_heading;
use crate::registration::{icp, IcpMetric, IcpParams, MotionModel};

use super::Track;

/// Source of the initial guess for each registration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RegistrationInit {
    /// Mean scene flow of the two observations times the elapsed time.
    #[default]
    Flow,
    /// Displacement of the Kalman-filtered centers.
    Kalman,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegistrationParams {
    pub icp: IcpParams,
    /// Mean residual (m) above which a registration counts as diverged.
    pub divergence_residual: f64,
    pub init: RegistrationInit,
    /// Frame period (s), used by flow initialization.
    pub dt: f64,
}

impl Default for RegistrationParams {
    fn default() -> Self {
        Self {
            icp: IcpParams {
                motion: MotionModel::Ground,
                trim_fraction: 0.2,
                metric: IcpMetric::PointToPlane,
                ..IcpParams::default()
            },
            divergence_residual: 0.3,
            init: RegistrationInit::default(),
            dt: 0.1,
        }
    }
}

/// Observations of one track merged into the frame of its first observation.
#[derive(Debug, Clone, PartialEq)]
pub struct RegisteredShape {
    pub aggregated_points: Vec<Point3>,
    /// Maps observation `i`'s world points into the canonical frame.
    pub per_frame_transforms: Vec<Pose>,
    /// Slice of `aggregated_points` contributed by observation `i`.
    pub partition: Vec<Range<usize>>,
    /// Observations whose registration diverged and kept the initial guess.
    pub flagged: Vec<bool>,
}

impl RegisteredShape {
    pub fn len(&self) -> usize {
        self.per_frame_transforms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_frame_transforms.is_empty()
    }
}

/// Registers every observation of `track` onto the growing aggregate.
///
/// `frame_points[f]` is the point array frame `f`'s proposals index into.
/// Each ICP run starts from the previous transform shifted back by the
/// object's estimated displacement between the two observations.
pub fn register_track<P: AsRef<[Point3]>>(
    track: &Track,
    frame_points: &[P],
    params: &RegistrationParams,
) -> Result<RegisteredShape> {
    if track.is_empty() {
        return Err(Error::InvalidParameter("cannot register an empty track".into()));
    }
    let member_points = |k: usize| -> Result<Vec<Point3>> {
        let obs = &track.observations[k];
        let pts = frame_points
            .get(obs.frame)
            .ok_or_else(|| Error::Pipeline(format!("track {} references missing frame {}", track.id, obs.frame)))?
            .as_ref();
        obs.proposal
            .point_indices
            .iter()
            .map(|&i| {
                pts.get(i).copied().ok_or_else(|| {
                    Error::Pipeline(format!("track {} references point {i} beyond frame {}", track.id, obs.frame))
                })
            })
            .collect()
    };

    let first = member_points(0)?;
    let mut shape = RegisteredShape {
        partition: vec![0..first.len()],
        aggregated_points: first,
        per_frame_transforms: vec![Pose::identity()],
        flagged: vec![false],
    };
    for k in 1..track.len() {
        let pts = member_points(k)?;
        let prev = shape.per_frame_transforms[k - 1];
        let (a, b) = (&track.observations[k - 1], &track.observations[k]);
        let shift = match params.init {
            RegistrationInit::Kalman => a.filtered - b.filtered,
            RegistrationInit::Flow => {
                let elapsed = (b.frame - a.frame) as f64 * params.dt;
                -(a.proposal.mean_flow + b.proposal.mean_flow) * 0.5 * elapsed
            }
        };
        let init = prev.compose(&Pose::from_translation(shift));
        let (pose, flagged) = if pts.is_empty() {
            (init, true)
        } else {
            let index = SpatialIndex::new(&shape.aggregated_points);
            let res = icp(&pts, &index, init, &params.icp);
            if res.mean_residual > params.divergence_residual {
                (init, true)
            } else {
                (res.pose, false)
            }
        };
        let start = shape.aggregated_points.len();
        shape.aggregated_points.extend(pts.iter().map(|p| pose.transform_point(p)));
        shape.partition.push(start..shape.aggregated_points.len());
        shape.per_frame_transforms.push(pose);
        shape.flagged.push(flagged);
    }
    Ok(shape)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmodalParams {
    /// Track speed above which the box faces along the motion (m/s).
    pub moving_threshold: f64,
    pub min_extent: f64,
    /// Lower the box bottom onto the ground when the gap is at most this (m).
    /// Ground removal strips the lowest slice of every object.
    pub ground_snap: Option<f64>,
}

impl Default for AmodalParams {
    fn default() -> Self {
        Self {
            moving_threshold: 1.0,
            min_extent: crate::geometry::DEFAULT_MIN_EXTENT,
            ground_snap: Some(0.6),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledBox {
    pub bbox: Box7,
    pub track_id: usize,
    pub frame: usize,
    pub score: f64,
    pub category: Option<usize>,
}

/// `min(1, len/10) · min(1, support/50)`.
pub fn label_score(track_len: usize, support_points: usize) -> f64 {
    (track_len as f64 / 10.0).min(1.0) * (support_points as f64 / 50.0).min(1.0)
}

/// One box over the aggregate, copied into every observed frame.
///
/// `ego_heading` is the ego yaw at the first observation; `ground`, when
/// given, is the ground plane in the canonical (first observation) frame.
pub fn amodalize(
    track: &Track,
    shape: &RegisteredShape,
    params: &AmodalParams,
    ego_heading: f64,
    ground: Option<&GroundModel>,
) -> Result<Vec<LabeledBox>> {
    if shape.len() != track.len() {
        return Err(Error::LengthMismatch {
            what: "track observations vs registered transforms",
            left: track.len(),
            right: shape.len(),
        });
    }
    // Motion direction expressed in the canonical frame.
    let flow = track
        .observations
        .iter()
        .zip(&shape.per_frame_transforms)
        .fold(Vector3::zeros(), |acc, (o, t)| acc + t.rotate_vector(&o.proposal.mean_flow))
        / track.len() as f64;
    let raw = fit_tightest_box_with_min(&shape.aggregated_points, None, params.min_extent)?;
    let heading = assign_heading(&flow, raw.heading, ego_heading, params.moving_threshold);
    let mut canonical = fit_tightest_box_with_min(&shape.aggregated_points, Some(heading), params.min_extent)?;
    if let (Some(snap), Some(g)) = (params.ground_snap, ground) {
        let gz = g.height_at(canonical.cx, canonical.cy);
        let gap = canonical.z_min() - gz;
        if gap > 0.0 && gap <= snap {
            let top = canonical.z_max();
            canonical.height = top - gz;
            canonical.cz = 0.5 * (top + gz);
        }
    }
    let score = label_score(track.len(), shape.aggregated_points.len());
    Ok(track
        .observations
        .iter()
        .zip(&shape.per_frame_transforms)
        .map(|(o, t)| LabeledBox {
            bbox: canonical.transformed(&t.inverse()),
            track_id: track.id,
            frame: o.frame,
            score,
            category: None,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CleanupParams {
    pub min_dim: f64,
    pub max_diag: f64,
    pub nms_iou: f64,
    pub iou_kind: IouKind,
}

impl Default for CleanupParams {
    fn default() -> Self {
        Self {
            min_dim: 0.05,
            max_diag: 20.0,
            nms_iou: 0.5,
            iou_kind: IouKind::Bev,
        }
    }
}

/// Per frame: size filter, then NMS. Output sorted by `(frame, track_id)`.
pub fn cleanup_labels(boxes: &[LabeledBox], params: &CleanupParams) -> Result<Vec<LabeledBox>> {
    let mut kept: Vec<LabeledBox> = boxes
        .iter()
        .filter(|b| {
            let d = &b.bbox;
            d.length.min(d.width).min(d.height) >= params.min_dim && d.bev_diagonal() <= params.max_diag
        })
        .copied()
        .collect();
    kept.sort_by_key(|b| (b.frame, b.track_id));
    let mut out = Vec::with_capacity(kept.len());
    for group in kept.chunk_by(|a, b| a.frame == b.frame) {
        let bxs: Vec<Box7> = group.iter().map(|b| b.bbox).collect();
        let scores: Vec<f64> = group.iter().map(|b| b.score).collect();
        let mut keep = nms_with(&bxs, &scores, params.nms_iou, params.iou_kind)?;
        keep.sort_unstable();
        out.extend(keep.into_iter().map(|i| group[i]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proposals::Proposal;
    use crate::tracking::{KalmanState, Observation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn box_surface(len: f64, wid: f64, hgt: f64, n: usize, seed: u64) -> Vec<Point3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let (x, y, z) = (
                    rng.random_range(-len / 2.0..len / 2.0),
                    rng.random_range(-wid / 2.0..wid / 2.0),
                    rng.random_range(0.2..hgt),
                );
                match i % 3 {
                    0 => Point3::new(if i % 2 == 0 { -len / 2.0 } else { len / 2.0 }, y, z),
                    1 => Point3::new(x, if i % 2 == 0 { -wid / 2.0 } else { wid / 2.0 }, z),
                    _ => Point3::new(x, y, hgt),
                }
            })
            .collect()
    }

    fn track_from(frames: &[Vec<Point3>], step: Vector3) -> Track {
        let observations = frames
            .iter()
            .enumerate()
            .map(|(f, pts)| Observation {
                frame: f,
                proposal: Proposal {
                    bbox: fit_tightest_box_with_min(pts, None, 0.05).unwrap(),
                    point_indices: (0..pts.len()).collect(),
                    mean_flow: step * 10.0,
                    bg_ratio: 0.0,
                },
                filtered: step * f as f64,
            })
            .collect();
        Track {
            id: 3,
            observations,
            state: KalmanState::new(Vector3::zeros(), Vector3::zeros(), 1.0, 1.0),
            misses: 0,
        }
    }

    #[test]
    fn static_identical_clouds_register_to_identity() {
        let pts = box_surface(4.0, 2.0, 1.5, 300, 1);
        let frames = vec![pts.clone(), pts.clone(), pts];
        let track = track_from(&frames, Vector3::zeros());
        let shape = register_track(&track, &frames, &RegistrationParams::default()).unwrap();
        for t in &shape.per_frame_transforms {
            assert!((t.to_row_major().iter().zip(Pose::identity().to_row_major()))
                .all(|(a, b)| (a - b).abs() < 1e-9));
        }
        assert!(shape.flagged.iter().all(|f| !f));
    }

    #[test]
    fn translated_clouds_recovered() {
        let base = box_surface(4.0, 2.0, 1.5, 400, 2);
        let step = Vector3::new(0.5, 0.2, 0.0);
        let frames: Vec<Vec<Point3>> = (0..5)
            .map(|f| base.iter().map(|p| p + step * f as f64).collect())
            .collect();
        // Both initial guesses off by 0.1 m per frame to make ICP do the work.
        let mut track = track_from(&frames, step);
        for o in track.observations.iter_mut().skip(1) {
            o.filtered += Vector3::new(0.1, 0.0, 0.0);
            o.proposal.mean_flow += Vector3::new(1.0, 0.0, 0.0);
        }
        let mut shape = None;
        for (init, metric, tol) in [
            (RegistrationInit::Kalman, IcpMetric::PointToPoint, 1e-3),
            (RegistrationInit::Flow, IcpMetric::PointToPoint, 1e-3),
            (RegistrationInit::Flow, IcpMetric::PointToPlane, 5e-3),
        ] {
            let mut params = RegistrationParams {
                init,
                ..Default::default()
            };
            params.icp.metric = metric;
            let s = register_track(&track, &frames, &params).unwrap();
            for (f, t) in s.per_frame_transforms.iter().enumerate() {
                assert!((t.translation() + step * f as f64).norm() < tol, "{init:?} {metric:?} frame {f}: {t:?}");
            }
            shape = Some(s);
        }
        let shape = shape.unwrap();
        // Partition reproduces the aggregate.
        for (k, r) in shape.partition.iter().enumerate() {
            for (p, q) in frames[k].iter().zip(&shape.aggregated_points[r.clone()]) {
                assert_eq!(shape.per_frame_transforms[k].transform_point(p), *q);
            }
        }
    }

    #[test]
    fn single_frame_amodal_is_visible_box() {
        let pts = box_surface(4.0, 2.0, 1.5, 100, 3);
        let track = track_from(std::slice::from_ref(&pts), Vector3::zeros());
        let shape = register_track(&track, std::slice::from_ref(&pts), &RegistrationParams::default()).unwrap();
        let labels = amodalize(&track, &shape, &AmodalParams::default(), 0.0, None).unwrap();
        assert_eq!(labels.len(), 1);
        let raw = fit_tightest_box_with_min(&pts, None, 0.05).unwrap();
        let h = assign_heading(&Vector3::zeros(), raw.heading, 0.0, 1.0);
        let want = fit_tightest_box_with_min(&pts, Some(h), 0.05).unwrap();
        assert_eq!(labels[0].bbox, want);
    }

    #[test]
    fn amodal_dims_shared_across_frames() {
        let base = box_surface(4.0, 2.0, 1.5, 400, 4);
        let step = Vector3::new(0.5, 0.0, 0.0);
        let frames: Vec<Vec<Point3>> = (0..4)
            .map(|f| base.iter().map(|p| p + step * f as f64).collect())
            .collect();
        let track = track_from(&frames, step);
        let shape = register_track(&track, &frames, &RegistrationParams::default()).unwrap();
        let ground = GroundModel::horizontal(0.0, 0.3);
        let labels = amodalize(&track, &shape, &AmodalParams::default(), 0.0, Some(&ground)).unwrap();
        assert_eq!(labels.len(), 4);
        for (f, l) in labels.iter().enumerate() {
            assert_eq!(l.bbox.length, labels[0].bbox.length);
            assert_eq!(l.bbox.height, labels[0].bbox.height);
            assert!((l.bbox.cx - labels[0].bbox.cx - 0.5 * f as f64).abs() < 1e-3);
            assert!(l.bbox.z_min().abs() < 1e-9, "snapped to ground");
            assert!(l.bbox.heading.abs() < 1e-9, "faces along motion");
        }
        assert!((labels[0].score - 0.4).abs() < 1e-12);
    }

    #[test]
    fn cleanup_filters_and_suppresses() {
        let b = Box7::new(Point3::new(0.0, 0.0, 1.0), 4.0, 2.0, 1.5, 0.0).unwrap();
        let lb = |bbox, track_id, score| LabeledBox {
            bbox,
            track_id,
            frame: 0,
            score,
            category: None,
        };
        let tiny = Box7::new(Point3::new(10.0, 0.0, 0.0), 0.01, 0.01, 0.01, 0.0).unwrap();
        let out = cleanup_labels(
            &[lb(b, 0, 0.5), lb(b, 1, 0.9), lb(tiny, 2, 1.0)],
            &CleanupParams::default(),
        )
        .unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].track_id, 1);
    }
}
