//! Oriented boxes: tight fitting, 3D/BEV IoU and non-maximum suppression.
//!
//! ```bash
//! cargo run --example box_geometry
//! ```

use lidar_autolabel::geometry::{fit_tightest_box, iou_3d, iou_bev, nms, Box7, Point3, Pose, Vector3};

fn main() -> lidar_autolabel::Result<()> {
    // Points on the two visible faces of a car rotated by 30 degrees.
    let pose = Pose::from_yaw(30f64.to_radians(), Vector3::new(12.0, 4.0, 0.0));
    let mut points = Vec::new();
    for i in 0..=20 {
        for k in 0..=6 {
            let z = 0.2 + 0.2 * k as f64;
            points.push(pose.transform_point(&Point3::new(-2.25 + 0.225 * i as f64, -0.9, z)));
            points.push(pose.transform_point(&Point3::new(-2.25, -0.9 + 0.09 * i as f64, z)));
        }
    }
    let fitted = fit_tightest_box(&points, None)?;
    println!(
        "fitted: center ({:.2}, {:.2}, {:.2}) dims {:.2} x {:.2} x {:.2} heading {:.1} deg",
        fitted.cx,
        fitted.cy,
        fitted.cz,
        fitted.length,
        fitted.width,
        fitted.height,
        fitted.heading.to_degrees()
    );

    let a = Box7::new(Point3::new(0.0, 0.0, 0.8), 4.5, 1.9, 1.6, 0.0)?;
    let b = Box7::new(Point3::new(1.0, 0.3, 0.9), 4.5, 1.9, 1.6, 0.2)?;
    println!("IoU 3D {:.3}  BEV {:.3}", iou_3d(&a, &b), iou_bev(&a, &b));

    let c = Box7::new(Point3::new(10.0, 0.0, 0.8), 4.5, 1.9, 1.6, 0.0)?;
    let kept = nms(&[a, b, c], &[0.6, 0.9, 0.5], 0.3)?;
    println!("NMS keeps indices {kept:?}");
    Ok(())
}
