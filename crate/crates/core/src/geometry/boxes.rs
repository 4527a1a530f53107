use nalgebra::Point2;

use super::{normalize_angle, Point3, Pose, Vector3};
use crate::error::{Error, Result};

/// Slack for boundary-inclusive membership against rounding in the box frame.
const MEMBERSHIP_EPS: f64 = 1e-9;

/// Upright 3D box: center, extents and heading.
///
/// `length` is measured along the heading direction, `width` across it and
/// `height` along world z. Heading is kept in `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box7 {
    pub cx: f64,
    pub cy: f64,
    pub cz: f64,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub heading: f64,
}

/// Which overlap measure to use where both are meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IouKind {
    #[default]
    Bev,
    ThreeD,
}

impl IouKind {
    pub fn iou(self, a: &Box7, b: &Box7) -> f64 {
        match self {
            IouKind::Bev => iou_bev(a, b),
            IouKind::ThreeD => iou_3d(a, b),
        }
    }
}

impl Box7 {
    pub fn new(
        center: Point3,
        length: f64,
        width: f64,
        height: f64,
        heading: f64,
    ) -> Result<Self> {
        let b = Box7 {
            cx: center.x,
            cy: center.y,
            cz: center.z,
            length,
            width,
            height,
            heading: normalize_angle(heading),
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.cx,
            self.cy,
            self.cz,
            self.length,
            self.width,
            self.height,
            self.heading,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidBox("non-finite parameter".into()));
        }
        if self.length <= 0.0 || self.width <= 0.0 || self.height <= 0.0 {
            return Err(Error::InvalidBox(format!(
                "non-positive extent ({}, {}, {})",
                self.length, self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn center(&self) -> Point3 {
        Point3::new(self.cx, self.cy, self.cz)
    }

    pub fn volume(&self) -> f64 {
        self.length * self.width * self.height
    }

    pub fn bev_area(&self) -> f64 {
        self.length * self.width
    }

    pub fn bev_diagonal(&self) -> f64 {
        self.length.hypot(self.width)
    }

    pub fn z_min(&self) -> f64 {
        self.cz - 0.5 * self.height
    }

    pub fn z_max(&self) -> f64 {
        self.cz + 0.5 * self.height
    }

    /// Box-to-world pose (box frame: x along heading, origin at center).
    pub fn pose(&self) -> Pose {
        Pose::from_yaw(self.heading, self.center().coords)
    }

    /// Applies a rigid transform. Only the yaw part of the rotation is kept,
    /// so the result stays upright.
    pub fn transformed(&self, pose: &Pose) -> Box7 {
        let c = pose.transform_point(&self.center());
        Box7 {
            cx: c.x,
            cy: c.y,
            cz: c.z,
            heading: normalize_angle(self.heading + pose.yaw()),
            ..*self
        }
    }

    /// BEV footprint, counter-clockwise, starting at the front-left corner.
    pub fn bev_corners(&self) -> [Point2<f64>; 4] {
        let (s, c) = self.heading.sin_cos();
        let hl = 0.5 * self.length;
        let hw = 0.5 * self.width;
        let local = [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)];
        local.map(|(x, y)| Point2::new(self.cx + c * x - s * y, self.cy + s * x + c * y))
    }

    /// The 8 corners. Indices 0..4 are the bottom face and 4..8 the top face,
    /// each counter-clockwise seen from above starting at front-left
    /// (`+length/2, +width/2` in the box frame).
    pub fn corners(&self) -> [Point3; 8] {
        let bev = self.bev_corners();
        let (z0, z1) = (self.z_min(), self.z_max());
        std::array::from_fn(|i| {
            let p = bev[i % 4];
            Point3::new(p.x, p.y, if i < 4 { z0 } else { z1 })
        })
    }

    /// Coordinates of `p` in the box frame.
    pub fn to_local(&self, p: &Point3) -> Vector3 {
        let (s, c) = self.heading.sin_cos();
        let dx = p.x - self.cx;
        let dy = p.y - self.cy;
        Vector3::new(c * dx + s * dy, -s * dx + c * dy, p.z - self.cz)
    }

    pub fn contains(&self, p: &Point3) -> bool {
        let l = self.to_local(p);
        l.x.abs() <= 0.5 * self.length + MEMBERSHIP_EPS
            && l.y.abs() <= 0.5 * self.width + MEMBERSHIP_EPS
            && l.z.abs() <= 0.5 * self.height + MEMBERSHIP_EPS
    }
}

/// Membership mask, boundary inclusive.
pub fn points_in_box(b: &Box7, points: &[Point3]) -> Vec<bool> {
    points.iter().map(|p| b.contains(p)).collect()
}

/// Shoelace area of a simple polygon (positive when counter-clockwise).
pub fn polygon_area(poly: &[Point2<f64>]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        acc += a.x * b.y - b.x * a.y;
    }
    0.5 * acc
}

fn cross(o: Point2<f64>, a: Point2<f64>, b: Point2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Sutherland–Hodgman clipping of `subject` by the convex CCW polygon `clip`.
fn clip_convex(subject: &[Point2<f64>], clip: &[Point2<f64>]) -> Vec<Point2<f64>> {
    let mut output = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let e0 = clip[i];
        let e1 = clip[(i + 1) % clip.len()];
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let cur_side = cross(e0, e1, cur);
            let prev_side = cross(e0, e1, prev);
            if cur_side >= 0.0 {
                if prev_side < 0.0 {
                    output.push(segment_line_intersection(prev, cur, prev_side, cur_side));
                }
                output.push(cur);
            } else if prev_side >= 0.0 {
                output.push(segment_line_intersection(prev, cur, prev_side, cur_side));
            }
        }
    }
    output
}

fn segment_line_intersection(
    p: Point2<f64>,
    q: Point2<f64>,
    p_side: f64,
    q_side: f64,
) -> Point2<f64> {
    let t = p_side / (p_side - q_side);
    Point2::from(p.coords + (q.coords - p.coords) * t)
}

fn bev_intersection_area(a: &Box7, b: &Box7) -> f64 {
    let pa = a.bev_corners();
    let pb = b.bev_corners();
    // Quick reject on circumscribed circles.
    let d = (a.cx - b.cx).hypot(a.cy - b.cy);
    if d > 0.5 * (a.bev_diagonal() + b.bev_diagonal()) {
        return 0.0;
    }
    polygon_area(&clip_convex(&pa, &pb)).max(0.0)
}

/// Bird's-eye-view IoU of the footprints.
pub fn iou_bev(a: &Box7, b: &Box7) -> f64 {
    let inter = bev_intersection_area(a, b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.bev_area() + b.bev_area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Volumetric IoU: footprint intersection area times z-overlap.
pub fn iou_3d(a: &Box7, b: &Box7) -> f64 {
    let z_overlap = (a.z_max().min(b.z_max()) - a.z_min().max(b.z_min())).max(0.0);
    if z_overlap <= 0.0 {
        return 0.0;
    }
    let inter = bev_intersection_area(a, b) * z_overlap;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.volume() + b.volume() - inter;
    (inter / union).clamp(0.0, 1.0)
}
