use nalgebra::{Matrix3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{Point3, Vector3};

/// Plane `normal · p + offset = 0` with an upward unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundModel {
    pub normal: Vector3,
    pub offset: f64,
    /// Points at or below this height above the plane count as ground (m).
    pub clearance: f64,
}

impl GroundModel {
    pub fn horizontal(z: f64, clearance: f64) -> Self {
        Self {
            normal: Vector3::z(),
            offset: -z,
            clearance,
        }
    }

    pub fn signed_distance(&self, p: &Point3) -> f64 {
        self.normal.dot(&p.coords) + self.offset
    }

    /// Height of the plane below `(x, y)`.
    pub fn height_at(&self, x: f64, y: f64) -> f64 {
        -(self.normal.x * x + self.normal.y * y + self.offset) / self.normal.z
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundParams {
    /// Candidate band above the low height percentile (m).
    pub band: f64,
    pub inlier_threshold: f64,
    pub iterations: usize,
    pub min_inlier_ratio: f64,
    pub clearance: f64,
    pub seed: u64,
}

impl Default for GroundParams {
    fn default() -> Self {
        Self {
            band: 1.5,
            inlier_threshold: 0.1,
            iterations: 200,
            min_inlier_ratio: 0.2,
            clearance: 0.3,
            seed: 0,
        }
    }
}

const MIN_GROUND_POINTS: usize = 50;

/// RANSAC plane over the lowest height band, refined by least squares on
/// the inliers.
pub fn fit_ground(points: &[Point3], params: &GroundParams) -> Result<GroundModel> {
    if points.len() < MIN_GROUND_POINTS {
        return Err(Error::GroundFit(format!(
            "{} points, need at least {MIN_GROUND_POINTS}",
            points.len()
        )));
    }
    let mut zs: Vec<f64> = points.iter().map(|p| p.z).collect();
    zs.sort_by(f64::total_cmp);
    let z_low = zs[zs.len() / 20];
    let candidates: Vec<Point3> = points
        .iter()
        .filter(|p| p.z <= z_low + params.band)
        .copied()
        .collect();
    if candidates.len() < 3 {
        return Err(Error::GroundFit("too few candidates in the low band".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(usize, Vector3, f64)> = None;
    for _ in 0..params.iterations {
        let i = rng.random_range(0..candidates.len());
        let j = rng.random_range(0..candidates.len());
        let k = rng.random_range(0..candidates.len());
        if i == j || j == k || i == k {
            continue;
        }
        let (a, b, c) = (candidates[i], candidates[j], candidates[k]);
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        if len < 1e-9 {
            continue;
        }
        let mut n = n / len;
        if n.z < 0.0 {
            n = -n;
        }
        let d = -n.dot(&a.coords);
        let count = candidates
            .iter()
            .filter(|p| (n.dot(&p.coords) + d).abs() <= params.inlier_threshold)
            .count();
        if best.as_ref().is_none_or(|(bc, _, _)| count > *bc) {
            best = Some((count, n, d));
        }
    }
    let Some((count, n, d)) = best else {
        return Err(Error::GroundFit("degenerate geometry: no plane hypothesis".into()));
    };
    if (count as f64) < params.min_inlier_ratio * candidates.len() as f64 {
        return Err(Error::GroundFit(format!(
            "best plane has {count} of {} inliers",
            candidates.len()
        )));
    }

    let inliers: Vec<&Point3> = candidates
        .iter()
        .filter(|p| (n.dot(&p.coords) + d).abs() <= params.inlier_threshold)
        .collect();
    let centroid = inliers.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / inliers.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in &inliers {
        let q = p.coords - centroid;
        cov += q * q.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let imin = eig.eigenvalues.imin();
    let mut normal: Vector3 = eig.eigenvectors.column(imin).into_owned();
    if normal.z < 0.0 {
        normal = -normal;
    }
    if normal.z < 1e-6 {
        return Err(Error::GroundFit("refined plane is vertical".into()));
    }
    Ok(GroundModel {
        normal,
        offset: -normal.dot(&centroid),
        clearance: params.clearance,
    })
}

/// `true` for points strictly more than `clearance` above the plane.
pub fn remove_ground(points: &[Point3], model: &GroundModel) -> Vec<bool> {
    points
        .iter()
        .map(|p| model.signed_distance(p) > model.clearance)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane_scene(tilt_deg: f64, seed: u64) -> Vec<Point3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let slope = tilt_deg.to_radians().tan();
        let mut pts = Vec::new();
        for _ in 0..2000 {
            let x: f64 = rng.random_range(-20.0..20.0);
            let y: f64 = rng.random_range(-20.0..20.0);
            pts.push(Point3::new(x, y, slope * x + rng.random_range(-0.02..0.02)));
        }
        // Two boxes standing on the plane.
        for (bx, by) in [(5.0, 3.0), (-8.0, -6.0)] {
            for _ in 0..300 {
                let x = bx + rng.random_range(-2.0..2.0);
                let y = by + rng.random_range(-1.0..1.0);
                pts.push(Point3::new(x, y, slope * x + rng.random_range(0.0..1.6)));
            }
        }
        pts
    }

    #[test]
    fn flat_ground_recovered() {
        let g = fit_ground(&plane_scene(0.0, 1), &GroundParams::default()).unwrap();
        assert!(g.normal.z.acos().to_degrees() < 1.0);
        assert!(g.offset.abs() <= 0.02);
    }

    #[test]
    fn tilted_ground_recovered() {
        let g = fit_ground(&plane_scene(5.0, 2), &GroundParams::default()).unwrap();
        let truth = Vector3::new(-(5f64.to_radians().sin()), 0.0, 5f64.to_radians().cos());
        assert!(g.normal.dot(&truth).clamp(-1.0, 1.0).acos().to_degrees() < 1.0);
    }

    #[test]
    fn line_is_degenerate() {
        let pts: Vec<Point3> = (0..100).map(|i| Point3::new(i as f64 * 0.1, 0.0, 0.0)).collect();
        assert!(matches!(fit_ground(&pts, &GroundParams::default()), Err(Error::GroundFit(_))));
    }

    #[test]
    fn clearance_is_strict() {
        let g = GroundModel::horizontal(0.0, 0.3);
        let keep = remove_ground(
            &[Point3::new(0.0, 0.0, 1.0), Point3::origin(), Point3::new(0.0, 0.0, 0.3)],
            &g,
        );
        assert_eq!(keep, vec![true, false, false]);
    }
}
