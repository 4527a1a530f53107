//! 3D primitives shared by every pipeline stage: rigid poses, upright
//! boxes, oriented IoU, point-in-box tests, tight box fitting, NMS and a
//! k-d tree for radius / nearest-neighbor queries.

mod boxes;
mod fit;
mod kdtree;
mod nms;

use std::f64::consts::PI;

use nalgebra::Matrix3;

use crate::error::{Error, Result};

pub use boxes::{iou_3d, iou_bev, points_in_box, polygon_area, Box7, IouKind};
pub use fit::{convex_hull_2d, fit_tightest_box, fit_tightest_box_with_min, DEFAULT_MIN_EXTENT};
pub use kdtree::SpatialIndex;
pub use nms::{nms, nms_with};

pub type Point3 = nalgebra::Point3<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;

/// Wraps an angle into `(-π, π]`. `-π` maps to `π`.
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Rigid transform `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    const ORTHO_TOL: f64 = 1e-9;

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Validates that `rotation` is a proper rotation (orthonormal, det +1).
    pub fn new(rotation: Matrix3<f64>, translation: Vector3) -> Result<Self> {
        if rotation.iter().chain(translation.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidPose("non-finite entry".into()));
        }
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        if gram.amax() > Self::ORTHO_TOL {
            return Err(Error::InvalidPose(format!(
                "rotation not orthonormal (max deviation {:.3e})",
                gram.amax()
            )));
        }
        if (rotation.determinant() - 1.0).abs() > Self::ORTHO_TOL {
            return Err(Error::InvalidPose("rotation determinant is not +1".into()));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_yaw(yaw: f64, translation: Vector3) -> Self {
        let (s, c) = yaw.sin_cos();
        Self {
            rotation: Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
            translation,
        }
    }

    pub fn from_translation(translation: Vector3) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3 {
        &self.translation
    }

    /// Heading of the rotated x axis in the xy plane.
    pub fn yaw(&self) -> f64 {
        self.rotation[(1, 0)].atan2(self.rotation[(0, 0)])
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn rotate_vector(&self, v: &Vector3) -> Vector3 {
        self.rotation * v
    }

    /// Row-major `[R | t]`, 12 values.
    #[rustfmt::skip]
    pub fn to_row_major(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x,
            r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y,
            r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z,
        ]
    }

    pub fn from_row_major(v: &[f64]) -> Result<Self> {
        if v.len() != 12 {
            return Err(Error::InvalidPose(format!("expected 12 values, got {}", v.len())));
        }
        let rotation = Matrix3::new(v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10]);
        Self::new(rotation, Vector3::new(v[3], v[7], v[11]))
    }
}

/// Applies `pose` to every point.
pub fn transform_points(points: &[Point3], pose: &Pose) -> Result<Vec<Point3>> {
    points
        .iter()
        .enumerate()
        .map(|(index, p)| {
            if p.coords.iter().all(|c| c.is_finite()) {
                Ok(pose.transform_point(p))
            } else {
                Err(Error::NonFinitePoint { index })
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn identity_leaves_points_alone() {
        let pts = vec![Point3::new(1.5, -2.0, 3.25), Point3::new(0.0, 0.0, 0.0)];
        assert_eq!(transform_points(&pts, &Pose::identity()).unwrap(), pts);
    }

    #[test]
    fn translation_moves_origin() {
        let pose = Pose::from_translation(Vector3::new(1.0, 0.0, 0.0));
        let out = transform_points(&[Point3::origin()], &pose).unwrap();
        assert_eq!(out[0], Point3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn yaw_quarter_turn() {
        let pose = Pose::from_yaw(FRAC_PI_2, Vector3::zeros());
        let out = transform_points(&[Point3::new(1.0, 0.0, 0.0)], &pose).unwrap();
        assert!((out[0] - Point3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn non_finite_point_names_index() {
        let pts = vec![Point3::origin(), Point3::new(f64::NAN, 0.0, 0.0)];
        match transform_points(&pts, &Pose::identity()) {
            Err(Error::NonFinitePoint { index }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn compose_and_inverse() {
        let a = Pose::from_yaw(0.3, Vector3::new(1.0, 2.0, 0.5));
        let b = Pose::from_yaw(-1.1, Vector3::new(-0.5, 0.0, 2.0));
        let p = Point3::new(0.3, -0.7, 1.2);
        let ab = a.compose(&b);
        assert!((ab.transform_point(&p) - a.transform_point(&b.transform_point(&p))).norm() < 1e-12);
        let back = ab.inverse().transform_point(&ab.transform_point(&p));
        assert!((back - p).norm() < 1e-12);
    }

    #[test]
    fn rejects_reflection() {
        let m = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(Pose::new(m, Vector3::zeros()).is_err());
        let skew = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(Pose::new(skew, Vector3::zeros()).is_err());
    }

    #[test]
    fn row_major_round_trip() {
        let a = Pose::from_yaw(2.0, Vector3::new(4.0, 5.0, 6.0));
        let b = Pose::from_row_major(&a.to_row_major()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn angle_normalization_boundaries() {
        assert_eq!(normalize_angle(-PI), PI);
        assert_eq!(normalize_angle(PI), PI);
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(-0.5) + 0.5).abs() < 1e-15);
        assert!((normalize_angle(7.0) - (7.0 - 2.0 * PI)).abs() < 1e-12);
    }
}
