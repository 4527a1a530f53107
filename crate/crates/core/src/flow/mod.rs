//! Ground removal, per-point scene flow and speed masking.
//!
//! Flow is estimated per rigid cluster: the source frame is split into
//! Euclidean clusters, and each cluster is registered with ICP against the
//! neighboring frame's points inside an expanded search region. A point's
//! flow is the displacement the cluster transform gives it, divided by the
//! frame interval. Precomputed flow can replace this estimator entirely.

mod ground;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Point3, SpatialIndex, Vector3};
use crate::registration::{icp, IcpMetric, IcpParams, MotionModel};

pub use ground::{fit_ground, remove_ground, GroundModel, GroundParams};

/// Per-point motion in m/s, world frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub vectors: Vec<Vector3>,
    /// Seconds between the two frames the flow was estimated from.
    pub dt: f64,
    /// Points whose cluster failed to register; their flow is zero.
    pub low_confidence: Vec<bool>,
}

impl FlowField {
    pub fn zeros(n: usize, dt: f64) -> Self {
        Self {
            vectors: vec![Vector3::zeros(); n],
            dt,
            low_confidence: vec![false; n],
        }
    }

    pub fn from_vectors(vectors: Vec<Vector3>, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("flow dt must be positive, got {dt}")));
        }
        if let Some(i) = vectors.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidParameter(format!("non-finite flow vector at {i}")));
        }
        let n = vectors.len();
        Ok(Self {
            vectors,
            dt,
            low_confidence: vec![false; n],
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn negated(mut self) -> Self {
        for v in &mut self.vectors {
            *v = -*v;
        }
        self
    }

    pub fn select(&self, mask: &[bool]) -> Self {
        let keep = |i: &usize| mask[*i];
        let idx: Vec<usize> = (0..self.len()).filter(keep).collect();
        Self {
            vectors: idx.iter().map(|&i| self.vectors[i]).collect(),
            dt: self.dt,
            low_confidence: idx.iter().map(|&i| self.low_confidence[i]).collect(),
        }
    }

    /// Scatters `self` (defined on the `true` entries of `mask`) back to a
    /// field over all points; unselected points get zero flow.
    pub fn expand(&self, mask: &[bool]) -> Self {
        let mut out = Self::zeros(mask.len(), self.dt);
        let mut k = 0;
        for (i, &m) in mask.iter().enumerate() {
            if m {
                out.vectors[i] = self.vectors[k];
                out.low_confidence[i] = self.low_confidence[k];
                k += 1;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParams {
    /// Linking distance of the Euclidean clustering (m).
    pub cluster_radius: f64,
    /// Added to a cluster's bounding radius to form the search region (m).
    pub search_margin: f64,
    /// Clusters whose final mean ICP residual exceeds this get zero flow (m).
    pub failure_residual: f64,
    pub icp: IcpParams,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            cluster_radius: 1.0,
            search_margin: 3.0,
            failure_residual: 0.3,
            icp: IcpParams {
                motion: MotionModel::Ground,
                trim_fraction: 0.1,
                metric: IcpMetric::PointToPlane,
                ..IcpParams::default()
            },
        }
    }
}

/// Connected components of the `radius`-neighborhood graph, each sorted,
/// ordered by smallest member.
pub fn euclidean_clusters(points: &[Point3], radius: f64) -> Vec<Vec<usize>> {
    let index = SpatialIndex::new(points);
    let mut label = vec![usize::MAX; points.len()];
    let mut clusters = Vec::new();
    for seed in 0..points.len() {
        if label[seed] != usize::MAX {
            continue;
        }
        let id = clusters.len();
        label[seed] = id;
        let mut members = vec![seed];
        let mut head = 0;
        while head < members.len() {
            let i = members[head];
            head += 1;
            for j in index.radius_neighbors(&points[i], radius) {
                if label[j] == usize::MAX {
                    label[j] = id;
                    members.push(j);
                }
            }
        }
        members.sort_unstable();
        clusters.push(members);
    }
    clusters
}

/// Flow of `source` points towards `target`, `dt` seconds later.
pub fn estimate_scene_flow(
    source: &[Point3],
    target: &[Point3],
    dt: f64,
    params: &FlowParams,
) -> Result<FlowField> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::MissingNeighborFrame("empty frame".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let clusters = euclidean_clusters(source, params.cluster_radius);
    let target_index = SpatialIndex::new(target);
    let per_cluster: Vec<(Vec<usize>, Option<crate::geometry::Pose>)> = clusters
        .into_par_iter()
        .map(|members| {
            let pts: Vec<Point3> = members.iter().map(|&i| source[i]).collect();
            let centroid = pts.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / pts.len() as f64;
            let centroid = Point3::from(centroid);
            let radius = pts.iter().map(|p| (p - centroid).norm()).fold(0.0, f64::max);
            let region: Vec<Point3> = target_index
                .radius_neighbors(&centroid, radius + params.search_margin)
                .into_iter()
                .map(|j| target[j])
                .collect();
            if pts.len() < 3 || region.len() < 3 {
                return (members, None);
            }
            let region_index = SpatialIndex::new(&region);
            let result = icp(&pts, &region_index, crate::geometry::Pose::identity(), &params.icp);
            let ok = result.mean_residual <= params.failure_residual && result.inliers >= 3;
            (members, ok.then_some(result.pose))
        })
        .collect();

    let mut flow = FlowField::zeros(source.len(), dt);
    for (members, pose) in per_cluster {
        match pose {
            Some(pose) => {
                for i in members {
                    flow.vectors[i] = (pose.transform_point(&source[i]) - source[i]) / dt;
                }
            }
            None => {
                for i in members {
                    flow.low_confidence[i] = true;
                }
            }
        }
    }
    Ok(flow)
}

/// Backward flow for the last frame of a sequence, negated so it points
/// forward in time.
pub fn backward_flow_negated(
    last: &[Point3],
    previous: &[Point3],
    dt: f64,
    params: &FlowParams,
) -> Result<FlowField> {
    Ok(estimate_scene_flow(last, previous, dt, params)?.negated())
}

/// Forward flow for every frame but the last, negated backward flow for the
/// last one. Needs at least two frames.
pub fn sequence_flow(frames: &[&[Point3]], dt: f64, params: &FlowParams) -> Result<Vec<FlowField>> {
    if frames.len() < 2 {
        return Err(Error::MissingNeighborFrame(format!(
            "sequence has {} frame(s)",
            frames.len()
        )));
    }
    let last = frames.len() - 1;
    (0..frames.len())
        .into_par_iter()
        .map(|t| {
            if t < last {
                estimate_scene_flow(frames[t], frames[t + 1], dt, params)
            } else {
                backward_flow_negated(frames[t], frames[t - 1], dt, params)
            }
        })
        .collect()
}

/// Per-point speed indicator, `true` iff `‖v‖ >= eps_sf`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpeedMask(pub Vec<bool>);

impl SpeedMask {
    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

pub fn speed_mask(flow: &FlowField, eps_sf: f64) -> SpeedMask {
    SpeedMask(flow.vectors.iter().map(|v| v.norm() >= eps_sf).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Samples the faces of a 4 x 1.6 x 1.2 m box (sides and roof).
    fn blob(center: Point3, n: usize, rng: &mut ChaCha8Rng) -> Vec<Point3> {
        (0..n)
            .map(|i| {
                let (x, y, z) = (
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-0.8..0.8),
                    rng.random_range(0.4..1.6),
                );
                let local = match i % 3 {
                    0 => Vector3::new(if i % 2 == 0 { -2.0 } else { 2.0 }, y, z),
                    1 => Vector3::new(x, if i % 2 == 0 { -0.8 } else { 0.8 }, z),
                    _ => Vector3::new(x, y, 1.6),
                };
                center + local
            })
            .collect()
    }

    fn point_to_point() -> FlowParams {
        let mut p = FlowParams::default();
        p.icp.metric = IcpMetric::PointToPoint;
        p
    }

    #[test]
    fn static_scene_has_zero_flow() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut pts = blob(Point3::origin(), 300, &mut rng);
        pts.extend(blob(Point3::new(10.0, 5.0, 0.0), 300, &mut rng));
        let f = estimate_scene_flow(&pts, &pts, 0.1, &FlowParams::default()).unwrap();
        assert!(f.vectors.iter().all(|v| v.norm() <= 1e-6));
    }

    #[test]
    fn translated_cluster() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts = blob(Point3::origin(), 400, &mut rng);
        let moved: Vec<Point3> = pts.iter().map(|p| p + Vector3::new(0.2, 0.0, 0.0)).collect();
        let f = estimate_scene_flow(&pts, &moved, 0.1, &FlowParams::default()).unwrap();
        for v in &f.vectors {
            assert!((v - Vector3::new(2.0, 0.0, 0.0)).norm() < 0.02, "{v:?}");
        }
        let f = estimate_scene_flow(&pts, &moved, 0.1, &point_to_point()).unwrap();
        for v in &f.vectors {
            assert!((v - Vector3::new(2.0, 0.0, 0.0)).norm() < 1e-3, "{v:?}");
        }
    }

    #[test]
    fn rotating_cluster_matches_rigid_velocity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = blob(Point3::origin(), 400, &mut rng);
        let omega = 0.5; // rad/s
        let dt = 0.1;
        let step = Pose::from_yaw(omega * dt, Vector3::zeros());
        let moved: Vec<Point3> = pts.iter().map(|p| step.transform_point(p)).collect();
        let f = estimate_scene_flow(&pts, &moved, dt, &FlowParams::default()).unwrap();
        for (p, v) in pts.iter().zip(&f.vectors) {
            let analytic = Vector3::new(-omega * p.y, omega * p.x, 0.0);
            if analytic.norm() > 0.2 {
                assert!((v - analytic).norm() <= 0.05 * analytic.norm(), "{v:?} vs {analytic:?}");
            }
        }
    }

    #[test]
    fn backward_flow_points_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let prev = blob(Point3::origin(), 300, &mut rng);
        let last: Vec<Point3> = prev.iter().map(|p| p + Vector3::new(0.3, 0.0, 0.0)).collect();
        let f = backward_flow_negated(&last, &prev, 0.1, &point_to_point()).unwrap();
        for v in &f.vectors {
            assert!((v - Vector3::new(3.0, 0.0, 0.0)).norm() < 1e-3, "{v:?}");
        }
        let still = backward_flow_negated(&prev, &prev, 0.1, &FlowParams::default()).unwrap();
        assert!(still.vectors.iter().all(|v| v.norm() <= 1e-6));
    }

    #[test]
    fn single_frame_sequence_errors() {
        let pts = vec![Point3::origin()];
        assert!(matches!(
            sequence_flow(&[&pts], 0.1, &FlowParams::default()),
            Err(Error::MissingNeighborFrame(_))
        ));
        assert!(estimate_scene_flow(&[], &pts, 0.1, &FlowParams::default()).is_err());
    }

    #[test]
    fn speed_mask_boundary() {
        let f = FlowField::from_vectors(
            vec![Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.5, 0.0, 0.0), Vector3::zeros()],
            0.1,
        )
        .unwrap();
        assert_eq!(speed_mask(&f, 1.0).0, vec![true, false, false]);
        assert_eq!(speed_mask(&f, 0.0).0, vec![true, true, true]);
    }

    #[test]
    fn select_and_expand_are_inverse() {
        let f = FlowField::from_vectors(
            (0..5).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect(),
            0.1,
        )
        .unwrap();
        let mask = [true, false, true, true, false];
        let back = f.select(&mask).expand(&mask);
        assert_eq!(back.vectors[2], f.vectors[2]);
        assert_eq!(back.vectors[1], Vector3::zeros());
    }
}
