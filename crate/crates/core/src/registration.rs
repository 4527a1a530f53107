//! ICP with nearest-neighbor correspondences: point-to-point (Besl–McKay)
//! or damped point-to-plane.

use nalgebra::{Matrix3, Matrix6, Rotation3, SymmetricEigen, Vector6, SVD};

use crate::geometry::{normalize_angle, Point3, Pose, SpatialIndex, Vector3};

/// Degrees of freedom of the estimated motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MotionModel {
    /// Full 3D rotation + translation.
    #[default]
    Rigid,
    /// Yaw + 3D translation; keeps upright objects upright.
    Planar,
    /// Yaw + horizontal translation: motion along a flat ground.
    Ground,
}

/// Error minimized per correspondence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IcpMetric {
    #[default]
    PointToPoint,
    /// Distance along the target's local surface normal. Directions the
    /// surfaces do not constrain (sliding along a wall) are held near the
    /// initial pose by a small prior instead of drifting.
    PointToPlane,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpParams {
    pub max_iterations: usize,
    /// Correspondences farther than this are ignored (m).
    pub max_correspondence_dist: f64,
    /// Stop once the incremental update moves less than this (m + rad).
    pub convergence: f64,
    /// Fraction of the worst correspondences dropped each iteration.
    pub trim_fraction: f64,
    pub motion: MotionModel,
    pub metric: IcpMetric,
    /// Neighborhood radius for target normals (m), point-to-plane only.
    pub normal_radius: f64,
    /// Prior weight per correspondence pulling towards the initial pose,
    /// point-to-plane only.
    pub prior_weight: f64,
    /// Minimum |cos| between source and target normals of a pair,
    /// point-to-plane only.
    pub normal_agreement: f64,
    /// Correspondence cap of the point-to-plane refinement (m).
    pub plane_correspondence_dist: f64,
    /// Score improvement (m) required to move away from `init`,
    /// point-to-plane only.
    pub motion_gate: f64,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            max_correspondence_dist: 2.0,
            convergence: 1e-4,
            trim_fraction: 0.0,
            motion: MotionModel::Rigid,
            metric: IcpMetric::PointToPoint,
            normal_radius: 0.5,
            prior_weight: 0.001,
            normal_agreement: 0.7,
            plane_correspondence_dist: 0.5,
            motion_gate: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpResult {
    /// Maps source points onto the target.
    pub pose: Pose,
    /// Mean correspondence distance at `pose` (∞ when nothing matched).
    pub mean_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub inliers: usize,
}

/// Surface normals of both clouds, used to restrict correspondences.
struct NormalSets {
    source: Vec<Option<Vector3>>,
    target: Vec<Option<Vector3>>,
}

/// Nearest-neighbor correspondences `(source index, target index, distance)`
/// within the cap, after trimming. With normals, a pair qualifies only if
/// both normals exist and are within the configured angle of each other.
fn correspondences(
    source: &[Point3],
    target: &SpatialIndex,
    pose: &Pose,
    params: &IcpParams,
    normals: Option<&NormalSets>,
) -> Vec<(usize, usize, f64)> {
    let mut corr: Vec<(usize, usize, f64)> = source
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let q = pose.transform_point(p);
            match normals {
                None => target
                    .nearest(&q)
                    .filter(|&(_, d)| d <= params.max_correspondence_dist)
                    .map(|(j, d)| (i, j, d)),
                Some(ns) => {
                    let ni = pose.rotate_vector(&ns.source[i]?);
                    target
                        .radius_neighbors(&q, params.max_correspondence_dist)
                        .into_iter()
                        .filter(|&j| ns.target[j].is_some_and(|nj| nj.dot(&ni).abs() >= params.normal_agreement))
                        .map(|j| (j, (target.points()[j] - q).norm()))
                        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                        .map(|(j, d)| (i, j, d))
                }
            }
        })
        .collect();
    if params.trim_fraction > 0.0 && corr.len() > 3 {
        corr.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)));
        let keep = ((1.0 - params.trim_fraction) * corr.len() as f64).ceil() as usize;
        corr.truncate(keep.max(3));
    }
    corr
}

/// Least-squares rigid motion mapping `src[i]` onto `dst[i]`.
pub fn best_fit_transform(src: &[Point3], dst: &[Point3], motion: MotionModel) -> Pose {
    let n = src.len().min(dst.len());
    if n == 0 {
        return Pose::identity();
    }
    let inv = 1.0 / n as f64;
    let cs = src[..n].iter().fold(Vector3::zeros(), |a, p| a + p.coords) * inv;
    let cd = dst[..n].iter().fold(Vector3::zeros(), |a, p| a + p.coords) * inv;
    match motion {
        MotionModel::Rigid => {
            let mut h = Matrix3::zeros();
            for (s, d) in src[..n].iter().zip(&dst[..n]) {
                h += (s.coords - cs) * (d.coords - cd).transpose();
            }
            let svd = SVD::new(h, true, true);
            let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
                return Pose::from_translation(cd - cs);
            };
            let v = v_t.transpose();
            let sign = (v * u.transpose()).determinant().signum();
            let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, sign));
            let r = v * fix * u.transpose();
            Pose::new(r, cd - r * cs).unwrap_or_else(|_| Pose::from_translation(cd - cs))
        }
        MotionModel::Planar | MotionModel::Ground => {
            let (mut sin_acc, mut cos_acc) = (0.0, 0.0);
            for (s, d) in src[..n].iter().zip(&dst[..n]) {
                let a = s.coords - cs;
                let b = d.coords - cd;
                sin_acc += a.x * b.y - a.y * b.x;
                cos_acc += a.x * b.x + a.y * b.y;
            }
            let yaw = if sin_acc == 0.0 && cos_acc == 0.0 {
                0.0
            } else {
                sin_acc.atan2(cos_acc)
            };
            let rot = Pose::from_yaw(yaw, Vector3::zeros());
            let mut t = cd - rot.rotate_vector(&cs);
            if motion == MotionModel::Ground {
                t.z = 0.0;
            }
            Pose::from_yaw(yaw, t)
        }
    }
}

fn update_size(delta: &Pose) -> f64 {
    let r = delta.rotation();
    let cos_angle = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    delta.translation().norm() + cos_angle.acos()
}

/// Unit normal per target point from the covariance of its neighborhood;
/// `None` where fewer than three neighbors are found.
pub fn estimate_normals(target: &SpatialIndex, radius: f64) -> Vec<Option<Vector3>> {
    target
        .points()
        .iter()
        .map(|p| {
            let nb = target.radius_neighbors(p, radius);
            if nb.len() < 3 {
                return None;
            }
            let pts = target.points();
            let mean = nb.iter().fold(Vector3::zeros(), |a, &j| a + pts[j].coords) / nb.len() as f64;
            let mut cov = Matrix3::zeros();
            for &j in &nb {
                let d = pts[j].coords - mean;
                cov += d * d.transpose();
            }
            let eig = SymmetricEigen::new(cov);
            let k = eig.eigenvalues.imin();
            Some(eig.eigenvectors.column(k).into_owned())
        })
        .collect()
}

/// One damped Gauss-Newton step of point-to-plane alignment. The unknowns
/// are a rotation about the centroid `c` of the moved source points and a
/// translation of `c`; the prior pulls the accumulated motion since `init`
/// back towards zero.
fn point_to_plane_step(
    moved: &[Point3],
    dst: &[Point3],
    normals: &[Vector3],
    pose: &Pose,
    init: &Pose,
    source_centroid: &Point3,
    params: &IcpParams,
) -> Option<Pose> {
    let n = moved.len();
    let c = moved.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n as f64;
    let mut jtj = Matrix6::<f64>::zeros();
    let mut jtr = Vector6::<f64>::zeros();
    for ((q, d), nrm) in moved.iter().zip(dst).zip(normals) {
        let arm = q.coords - c;
        let jr = arm.cross(nrm);
        let j = Vector6::new(jr.x, jr.y, jr.z, nrm.x, nrm.y, nrm.z);
        let r = nrm.dot(&(q - d));
        jtj += j * j.transpose();
        jtr += j * r;
    }
    // Motion accumulated since `init`: rotation and centroid displacement.
    let rel = Rotation3::from_matrix_unchecked(pose.rotation() * init.rotation().transpose()).scaled_axis();
    let shift = pose.transform_point(source_centroid) - init.transform_point(source_centroid);
    let offset = Vector6::new(rel.x, rel.y, rel.z, shift.x, shift.y, shift.z);
    let lambda = params.prior_weight * n as f64;
    let free: [bool; 6] = match params.motion {
        MotionModel::Rigid => [true; 6],
        MotionModel::Planar => [false, false, true, true, true, true],
        MotionModel::Ground => [false, false, true, true, true, false],
    };
    let mut a = jtj + Matrix6::identity() * lambda;
    let mut b = -jtr - offset * lambda;
    for (k, f) in free.iter().enumerate() {
        if !f {
            a.row_mut(k).fill(0.0);
            a.column_mut(k).fill(0.0);
            a[(k, k)] = 1.0;
            b[k] = 0.0;
        }
    }
    let x = a.cholesky()?.solve(&b);
    let omega = Vector3::new(x[0], x[1], x[2]);
    let t = Vector3::new(x[3], x[4], x[5]);
    let rot = Rotation3::new(omega).into_inner();
    Pose::new(rot, c + t - rot * c).ok()
}

/// Mean point-to-plane distance over source points with a normal, each
/// capped at the correspondence distance (unmatched points count as the cap).
fn plane_score(source: &[Point3], target: &SpatialIndex, pose: &Pose, normals: &NormalSets, params: &IcpParams) -> f64 {
    let cap = params.max_correspondence_dist;
    let (mut sum, mut n) = (0.0, 0usize);
    for (i, p) in source.iter().enumerate() {
        let Some(ni) = normals.source[i] else { continue };
        let q = pose.transform_point(p);
        let ni = pose.rotate_vector(&ni);
        let best = target
            .radius_neighbors(&q, cap)
            .into_iter()
            .filter_map(|j| {
                let nj = normals.target[j]?;
                (nj.dot(&ni).abs() >= params.normal_agreement).then(|| (target.points()[j] - q).norm())
                    .map(|d| (d, nj.dot(&(q - target.points()[j])).abs()))
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map_or(cap, |(_, plane)| plane.min(cap));
        sum += best;
        n += 1;
    }
    if n == 0 {
        f64::INFINITY
    } else {
        sum / n as f64
    }
}

/// Aligns `source` to the points indexed by `target`, starting from `init`.
///
/// Point-to-plane alignment first runs point-to-point ICP for a wide
/// convergence basin, then refines with normal-compatible pairs within
/// `plane_correspondence_dist`, with the prior anchored at `init`. The
/// result is kept only if its capped point-to-plane score beats `init` by
/// `motion_gate`; otherwise `init` is returned.
pub fn icp(source: &[Point3], target: &SpatialIndex, init: Pose, params: &IcpParams) -> IcpResult {
    match params.metric {
        IcpMetric::PointToPoint => icp_loop(source, target, init, &init, params, None),
        IcpMetric::PointToPlane => {
            let coarse = icp_loop(source, target, init, &init, params, None);
            let normals = NormalSets {
                source: estimate_normals(&SpatialIndex::new(source), params.normal_radius),
                target: estimate_normals(target, params.normal_radius),
            };
            let fine = IcpParams {
                max_correspondence_dist: params.plane_correspondence_dist,
                ..*params
            };
            let mut result = icp_loop(source, target, coarse.pose, &init, &fine, Some(&normals));
            result.iterations += coarse.iterations;
            let keep_init = plane_score(source, target, &init, &normals, &fine) - params.motion_gate
                <= plane_score(source, target, &result.pose, &normals, &fine);
            if keep_init && result.pose != init {
                let stay = icp_loop(source, target, init, &init, &IcpParams { max_iterations: 0, ..fine }, Some(&normals));
                return IcpResult {
                    iterations: result.iterations,
                    ..stay
                };
            }
            result
        }
    }
}

fn icp_loop(
    source: &[Point3],
    target: &SpatialIndex,
    start: Pose,
    anchor: &Pose,
    params: &IcpParams,
    normals: Option<&NormalSets>,
) -> IcpResult {
    let source_centroid = Point3::from(
        source.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / source.len().max(1) as f64,
    );
    let mut pose = start;
    let mut iterations = 0;
    let mut converged = false;
    if !source.is_empty() && !target.is_empty() {
        for _ in 0..params.max_iterations {
            iterations += 1;
            let corr = correspondences(source, target, &pose, params, normals);
            if corr.len() < 3 {
                break;
            }
            let src: Vec<Point3> = corr.iter().map(|&(i, _, _)| pose.transform_point(&source[i])).collect();
            let dst: Vec<Point3> = corr.iter().map(|&(_, j, _)| target.points()[j]).collect();
            let delta = match normals {
                None => best_fit_transform(&src, &dst, params.motion),
                Some(ns) => {
                    // Pairs only form where the target normal exists.
                    let n2: Vec<Vector3> = corr.iter().map(|&(_, j, _)| ns.target[j].expect("paired")).collect();
                    if n2.len() < 6 {
                        break;
                    }
                    match point_to_plane_step(&src, &dst, &n2, &pose, anchor, &source_centroid, params) {
                        Some(d) => d,
                        None => break,
                    }
                }
            };
            pose = delta.compose(&pose);
            if params.motion != MotionModel::Rigid {
                // Re-orthonormalize through the yaw parameterization.
                pose = Pose::from_yaw(normalize_angle(pose.yaw()), *pose.translation());
            }
            if update_size(&delta) < params.convergence {
                converged = true;
                break;
            }
        }
    }
    let corr = correspondences(source, target, &pose, params, normals);
    let mean_residual = if corr.is_empty() {
        f64::INFINITY
    } else {
        corr.iter().map(|c| c.2).sum::<f64>() / corr.len() as f64
    };
    IcpResult {
        pose,
        mean_residual,
        iterations,
        converged,
        inliers: corr.len(),
    }
}
