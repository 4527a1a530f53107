//! Density clustering of foreground points and visible-extent box proposals.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::geometry::{fit_tightest_box_with_min, normalize_angle, Box7, Point3, SpatialIndex, Vector3};
use crate::semantics::{BackgroundMask, EmbeddingSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterParams {
    /// Neighborhood radius in the composite feature space (m).
    pub eps: f64,
    /// Neighborhood size (self included) that makes a point a core point.
    pub min_pts: usize,
    /// Flow weight α in seconds: flow enters as displacement over α.
    pub flow_weight: f64,
    /// Weight β of the unit-normalized embedding.
    pub embedding_weight: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            eps: 1.0,
            min_pts: 5,
            flow_weight: 0.5,
            embedding_weight: 0.0,
        }
    }
}

impl ClusterParams {
    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) || self.min_pts == 0 {
            return Err(Error::InvalidParameter(
                "clustering needs eps > 0 and min_pts >= 1".into(),
            ));
        }
        if !(self.flow_weight >= 0.0) || !(self.embedding_weight >= 0.0) {
            return Err(Error::InvalidParameter(
                "clustering feature weights must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Cluster id per point, `None` for noise. Ids are `0..num_clusters`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterLabeling {
    pub labels: Vec<Option<usize>>,
    pub num_clusters: usize,
}

impl ClusterLabeling {
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_clusters];
        for (i, l) in self.labels.iter().enumerate() {
            if let Some(c) = l {
                out[*c].push(i);
            }
        }
        out
    }
}

fn unit_rows(emb: &EmbeddingSet) -> Vec<Vec<f64>> {
    emb.rows()
        .map(|r| {
            let n = r.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt();
            if n > 0.0 {
                r.iter().map(|&v| v as f64 / n).collect()
            } else {
                vec![0.0; r.len()]
            }
        })
        .collect()
}

/// DBSCAN over `position ⊕ α·flow ⊕ β·unit(embedding)`.
///
/// Core points are connected when their composite distance is `<= eps`;
/// clusters are numbered by their lowest-index core point. A border point
/// joins the cluster of its lowest-index core neighbor. Since the composite
/// distance bounds the spatial distance, candidates come from a 3D radius
/// query.
pub fn st_cluster(
    points: &[Point3],
    flow: Option<&FlowField>,
    emb: Option<&EmbeddingSet>,
    params: &ClusterParams,
) -> Result<ClusterLabeling> {
    params.validate()?;
    let n = points.len();
    if let Some(f) = flow {
        if f.len() != n {
            return Err(Error::LengthMismatch {
                what: "points vs flow",
                left: n,
                right: f.len(),
            });
        }
    }
    if let Some(e) = emb {
        if e.len() != n {
            return Err(Error::LengthMismatch {
                what: "points vs embeddings",
                left: n,
                right: e.len(),
            });
        }
    }
    let alpha2 = params.flow_weight * params.flow_weight;
    let beta2 = params.embedding_weight * params.embedding_weight;
    let units = match emb {
        Some(e) if beta2 > 0.0 => Some(unit_rows(e)),
        _ => None,
    };
    let eps2 = params.eps * params.eps;
    let composite2 = |i: usize, j: usize| {
        let mut d2 = (points[i] - points[j]).norm_squared();
        if let (Some(f), true) = (flow, alpha2 > 0.0) {
            d2 += alpha2 * (f.vectors[i] - f.vectors[j]).norm_squared();
        }
        if let Some(u) = &units {
            d2 += beta2 * u[i].iter().zip(&u[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        d2
    };

    let index = SpatialIndex::new(points);
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            index
                .radius_neighbors(&points[i], params.eps)
                .into_iter()
                .filter(|&j| j == i || composite2(i, j) <= eps2)
                .collect()
        })
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= params.min_pts).collect();

    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut num_clusters = 0;
    for seed in 0..n {
        if !core[seed] || labels[seed].is_some() {
            continue;
        }
        let id = num_clusters;
        num_clusters += 1;
        labels[seed] = Some(id);
        let mut queue = vec![seed];
        while let Some(i) = queue.pop() {
            for &j in &neighbors[i] {
                if core[j] && labels[j].is_none() {
                    labels[j] = Some(id);
                    queue.push(j);
                }
            }
        }
    }
    for i in 0..n {
        if !core[i] {
            labels[i] = neighbors[i]
                .iter()
                .filter(|&&j| core[j])
                .min()
                .and_then(|&j| labels[j]);
        }
    }
    Ok(ClusterLabeling {
        labels,
        num_clusters,
    })
}

/// Heading for a proposal.
///
/// Moving clusters (`‖mean_flow‖ >= moving_threshold` with non-zero ground
/// speed) face along their motion. Static ones keep `raw_heading` or its
/// reverse, whichever is within 90° of the ego heading; exactly 90° keeps
/// the raw heading.
pub fn assign_heading(mean_flow: &Vector3, raw_heading: f64, ego_heading: f64, moving_threshold: f64) -> f64 {
    let ground_speed = mean_flow.x.hypot(mean_flow.y);
    if mean_flow.norm() >= moving_threshold && ground_speed > 0.0 {
        return normalize_angle(mean_flow.y.atan2(mean_flow.x));
    }
    let raw = normalize_angle(raw_heading);
    if normalize_angle(raw - ego_heading).abs() <= FRAC_PI_2 {
        raw
    } else {
        normalize_angle(raw + PI)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub bbox: Box7,
    /// Indices into the point array the clustering ran on.
    pub point_indices: Vec<usize>,
    pub mean_flow: Vector3,
    pub bg_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProposalParams {
    /// Clusters with a larger background fraction are dropped.
    pub r_bg: f64,
    pub min_points: usize,
    /// Clusters whose box has a longer BEV diagonal are dropped (m).
    pub max_diag: f64,
    /// Speed above which a cluster's heading follows its motion (m/s).
    pub moving_threshold: f64,
    pub min_extent: f64,
}

impl Default for ProposalParams {
    fn default() -> Self {
        Self {
            r_bg: 0.99,
            min_points: 5,
            max_diag: 20.0,
            moving_threshold: 1.0,
            min_extent: crate::geometry::DEFAULT_MIN_EXTENT,
        }
    }
}

/// One tight box per cluster, minus background-dominated, tiny and huge ones.
pub fn propose_boxes(
    labeling: &ClusterLabeling,
    points: &[Point3],
    bg_mask: &BackgroundMask,
    flow: &FlowField,
    params: &ProposalParams,
    ego_heading: f64,
) -> Result<Vec<Proposal>> {
    if !(params.r_bg > 0.0 && params.r_bg <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "r_bg must lie in (0, 1], got {}",
            params.r_bg
        )));
    }
    for (what, len) in [
        ("points vs labels", labeling.labels.len()),
        ("points vs background mask", bg_mask.len()),
        ("points vs flow", flow.len()),
    ] {
        if len != points.len() {
            return Err(Error::LengthMismatch {
                what,
                left: points.len(),
                right: len,
            });
        }
    }
    let mut out = Vec::new();
    for members in labeling.members() {
        if members.len() < params.min_points.max(1) {
            continue;
        }
        let bg = members.iter().filter(|&&i| bg_mask.0[i]).count();
        let bg_ratio = bg as f64 / members.len() as f64;
        if bg_ratio > params.r_bg {
            continue;
        }
        let pts: Vec<Point3> = members.iter().map(|&i| points[i]).collect();
        let mean_flow =
            members.iter().fold(Vector3::zeros(), |a, &i| a + flow.vectors[i]) / members.len() as f64;
        let raw = fit_tightest_box_with_min(&pts, None, params.min_extent)?;
        let heading = assign_heading(&mean_flow, raw.heading, ego_heading, params.moving_threshold);
        let bbox = fit_tightest_box_with_min(&pts, Some(heading), params.min_extent)?;
        if bbox.bev_diagonal() > params.max_diag {
            continue;
        }
        out.push(Proposal {
            bbox,
            point_indices: members,
            mean_flow,
            bg_ratio,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_blob(cx: f64, n_side: usize) -> Vec<Point3> {
        let mut v = Vec::new();
        for i in 0..n_side {
            for j in 0..n_side {
                v.push(Point3::new(cx + i as f64 * 0.3, j as f64 * 0.3, 1.0));
            }
        }
        v
    }

    #[test]
    fn two_blobs_two_clusters() {
        let mut pts = grid_blob(0.0, 4);
        pts.extend(grid_blob(10.0, 4));
        let lab = st_cluster(&pts, None, None, &ClusterParams::default()).unwrap();
        assert_eq!(lab.num_clusters, 2);
        assert!(lab.labels[..16].iter().all(|&l| l == Some(0)));
        assert!(lab.labels[16..].iter().all(|&l| l == Some(1)));
    }

    #[test]
    fn flow_splits_colocated_points() {
        let pts = grid_blob(0.0, 4);
        let mut vecs = vec![Vector3::zeros(); 16];
        for v in vecs.iter_mut().skip(8) {
            *v = Vector3::new(20.0, 0.0, 0.0);
        }
        let flow = FlowField::from_vectors(vecs, 0.1).unwrap();
        let params = ClusterParams {
            min_pts: 3,
            ..Default::default()
        };
        let lab = st_cluster(&pts, Some(&flow), None, &params).unwrap();
        assert_eq!(lab.num_clusters, 2);
        assert_ne!(lab.labels[0], lab.labels[15]);
        let spatial = st_cluster(&pts, None, None, &params).unwrap();
        assert_eq!(spatial.num_clusters, 1);
    }

    #[test]
    fn rejects_bad_params() {
        let bad = ClusterParams {
            eps: 0.0,
            ..Default::default()
        };
        assert!(st_cluster(&[], None, None, &bad).is_err());
        let bad = ClusterParams {
            flow_weight: -1.0,
            ..Default::default()
        };
        assert!(st_cluster(&[], None, None, &bad).is_err());
    }

    #[test]
    fn heading_rules() {
        let h = assign_heading(&Vector3::new(2.0, 0.0, 0.0), 1.0, 0.3, 1.0);
        assert_eq!(h, 0.0);
        let h = assign_heading(&Vector3::zeros(), 170f64.to_radians(), 0.0, 1.0);
        assert!((h - (-10f64).to_radians()).abs() < 1e-12);
        let h = assign_heading(&Vector3::zeros(), FRAC_PI_2, 0.0, 1.0);
        assert_eq!(h, FRAC_PI_2);
        // Zero threshold with zero flow still counts as static.
        let h = assign_heading(&Vector3::zeros(), 3.0, 0.0, 0.0);
        assert!((h - normalize_angle(3.0 + PI)).abs() < 1e-12);
    }

    fn single_cluster(n: usize, bg: usize) -> (ClusterLabeling, Vec<Point3>, BackgroundMask, FlowField) {
        let pts: Vec<Point3> = (0..n).map(|i| Point3::new(i as f64 * 0.2, (i % 3) as f64 * 0.2, 1.0)).collect();
        let lab = ClusterLabeling {
            labels: vec![Some(0); n],
            num_clusters: 1,
        };
        let mask = BackgroundMask((0..n).map(|i| i < bg).collect());
        (lab, pts, mask, FlowField::zeros(n, 0.1))
    }

    #[test]
    fn background_ratio_filter() {
        let (lab, pts, mask, flow) = single_cluster(10, 10);
        assert!(propose_boxes(&lab, &pts, &mask, &flow, &ProposalParams::default(), 0.0)
            .unwrap()
            .is_empty());
        let (lab, pts, mask, flow) = single_cluster(10, 9);
        let props = propose_boxes(&lab, &pts, &mask, &flow, &ProposalParams::default(), 0.0).unwrap();
        assert_eq!(props.len(), 1);
        assert!((props[0].bg_ratio - 0.9).abs() < 1e-12);
        assert!(pts.iter().all(|p| props[0].bbox.contains(p)));
    }

    #[test]
    fn noise_produces_no_proposal() {
        let (mut lab, pts, mask, flow) = single_cluster(10, 0);
        lab.labels = vec![None; 10];
        lab.num_clusters = 0;
        assert!(propose_boxes(&lab, &pts, &mask, &flow, &ProposalParams::default(), 0.0)
            .unwrap()
            .is_empty());
    }
}
