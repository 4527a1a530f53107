use std::f64::consts::FRAC_PI_2;

use nalgebra::{Point2, Vector2};

use super::{normalize_angle, Box7, Point3};
use crate::error::{Error, Result};

/// Smallest extent a fitted box may have along any axis, in meters.
pub const DEFAULT_MIN_EXTENT: f64 = 0.05;

/// Andrew's monotone chain. Returns the hull counter-clockwise without
/// collinear vertices; 1 or 2 points for degenerate inputs.
pub fn convex_hull_2d(points: &[Point2<f64>]) -> Vec<Point2<f64>> {
    let mut pts: Vec<Point2<f64>> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>| {
        (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
    };
    let mut hull: Vec<Point2<f64>> = Vec::with_capacity(2 * pts.len());
    for p in pts.iter() {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    let lower_len = hull.len() + 1;
    for p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len
            && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(*p);
    }
    hull.pop();
    hull
}

struct Rect {
    heading: f64,
    center: Point2<f64>,
    length: f64,
    width: f64,
}

fn rect_at(points: &[Point2<f64>], heading: f64) -> Rect {
    let (s, c) = heading.sin_cos();
    let u = Vector2::new(c, s);
    let v = Vector2::new(-s, c);
    let (mut umin, mut umax, mut vmin, mut vmax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in points {
        let pu = p.coords.dot(&u);
        let pv = p.coords.dot(&v);
        umin = umin.min(pu);
        umax = umax.max(pu);
        vmin = vmin.min(pv);
        vmax = vmax.max(pv);
    }
    let mu = 0.5 * (umin + umax);
    let mv = 0.5 * (vmin + vmax);
    Rect {
        heading,
        center: Point2::from(u * mu + v * mv),
        length: umax - umin,
        width: vmax - vmin,
    }
}

/// Rotating calipers: the minimum-area rectangle has a side collinear with
/// a hull edge, so only hull edge directions are tried.
fn min_area_rect(points: &[Point2<f64>]) -> Rect {
    let hull = convex_hull_2d(points);
    match hull.len() {
        0 => unreachable!("caller guarantees at least one point"),
        1 => rect_at(&hull, 0.0),
        2 => {
            let d = hull[1] - hull[0];
            rect_at(&hull, d.y.atan2(d.x))
        }
        n => {
            let mut best: Option<(f64, Rect)> = None;
            for i in 0..n {
                let d = hull[(i + 1) % n] - hull[i];
                let r = rect_at(&hull, d.y.atan2(d.x));
                let area = r.length * r.width;
                if best.as_ref().is_none_or(|(a, _)| area < *a - 1e-12) {
                    best = Some((area, r));
                }
            }
            best.expect("non-empty hull").1
        }
    }
}

/// [`fit_tightest_box_with_min`] with [`DEFAULT_MIN_EXTENT`].
pub fn fit_tightest_box(points: &[Point3], heading: Option<f64>) -> Result<Box7> {
    fit_tightest_box_with_min(points, heading, DEFAULT_MIN_EXTENT)
}

/// Tightest upright box around `points`.
///
/// With a heading, the box axes are fixed and the extents are the ranges of
/// the projected points. Without one, the minimum-area BEV rectangle is used
/// and its longer side becomes `length`. Extents below `min_extent` are
/// widened symmetrically around the center.
pub fn fit_tightest_box_with_min(
    points: &[Point3],
    heading: Option<f64>,
    min_extent: f64,
) -> Result<Box7> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if let Some(index) = points.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
        return Err(Error::NonFinitePoint { index });
    }
    let bev: Vec<Point2<f64>> = points.iter().map(|p| Point2::new(p.x, p.y)).collect();
    let mut rect = match heading {
        Some(h) => rect_at(&bev, h),
        None => min_area_rect(&bev),
    };
    if heading.is_none() && rect.width > rect.length {
        rect = Rect {
            heading: rect.heading + FRAC_PI_2,
            center: rect.center,
            length: rect.width,
            width: rect.length,
        };
    }
    let zmin = points.iter().map(|p| p.z).fold(f64::MAX, f64::min);
    let zmax = points.iter().map(|p| p.z).fold(f64::MIN, f64::max);
    Box7::new(
        Point3::new(rect.center.x, rect.center.y, 0.5 * (zmin + zmax)),
        rect.length.max(min_extent),
        rect.width.max(min_extent),
        (zmax - zmin).max(min_extent),
        normalize_angle(rect.heading),
    )
}
