//! Average precision, CLEAR-MOT and the false-positive taxonomy on a small
//! hand-made sequence.
//!
//! ```bash
//! cargo run --example evaluation_metrics
//! ```

use lidar_autolabel::evalmetrics::{average_precision, clear_mot, fp_breakdown, Detection, GroundTruthBox};
use lidar_autolabel::geometry::{Box7, Point3};

fn car(x: f64, y: f64) -> Box7 {
    Box7::new(Point3::new(x, y, 0.8), 4.5, 1.9, 1.6, 0.0).expect("valid box")
}

fn main() -> lidar_autolabel::Result<()> {
    // Two cars over three frames, the second one static.
    let mut gts = Vec::new();
    for f in 0..3 {
        gts.push(GroundTruthBox { bbox: car(f as f64, 0.0), category: Some(0), frame: f, track_id: 0 });
        gts.push(GroundTruthBox { bbox: car(10.0, 5.0), category: Some(0), frame: f, track_id: 1 });
    }
    let det = |frame, x, y, score, track| Detection {
        bbox: car(x, y),
        score,
        category: Some(0),
        frame,
        track_id: Some(track),
    };
    let dets = vec![
        det(0, 0.1, 0.0, 0.9, 0),
        det(1, 1.1, 0.1, 0.9, 0),
        det(2, 2.0, 0.0, 0.9, 7), // identity switch
        det(0, 10.0, 5.0, 0.8, 1),
        det(1, 10.5, 5.0, 0.4, 1),
        det(2, 30.0, 5.0, 0.95, 1), // confident background false positive
    ];

    for thr in [0.4, 0.7] {
        println!("AP@{thr}: {:.3}", average_precision(&dets, &gts, thr, None));
    }
    let mot = clear_mot(&dets, &gts, 0.4);
    println!(
        "MOTA {:.1}  MOTP {:.1}  matches {} misses {} FP {} switches {}",
        mot.mota, mot.motp, mot.matches, mot.misses, mot.false_positives, mot.id_switches
    );
    let fp = fp_breakdown(&dets, &gts, 0.4, 0.1);
    println!(
        "false positives: {} localization, {} other object, {} background",
        fp.localization, fp.confusion_other, fp.confusion_background
    );
    Ok(())
}
