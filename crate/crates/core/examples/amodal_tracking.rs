//! Tracks a car driving past a parked one, registers its partial views and
//! fits one full-size box to the aggregate.
//!
//! ```bash
//! cargo run --release --example amodal_tracking
//! ```

use lidar_autolabel::config::PipelineConfig;
use lidar_autolabel::geometry::fit_tightest_box;
use lidar_autolabel::pipeline::run_autolabel;
use lidar_autolabel::synth::{generate, occlusion_scenario};

fn main() -> lidar_autolabel::Result<()> {
    let spec = occlusion_scenario("drive-by")?;
    let ds = generate(&spec, 7)?;
    let mut cfg = PipelineConfig::default();
    cfg.eps_sf = 0.0;
    let out = run_autolabel(&ds.frames, &ds.background_queries, ds.dt, &cfg)?;
    let truth = spec.objects[0].dims;
    println!("true size {:.2} x {:.2} x {:.2}", truth[0], truth[1], truth[2]);

    for track in out.tracks.iter().filter(|t| out.track_ids().contains(&t.id)) {
        let visible = track
            .observations
            .iter()
            .filter_map(|o| {
                let f = &ds.frames[o.frame];
                let pts: Vec<_> = o.proposal.point_indices.iter().map(|&i| f.points[i]).collect();
                fit_tightest_box(&pts, None).ok()
            })
            .map(|b| b.length)
            .fold(0.0, f64::max);
        let labels: Vec<_> = out.labels.iter().filter(|l| l.track_id == track.id).collect();
        let b = labels[0].bbox;
        println!(
            "track {}: {} frames, amodal box {:.2} x {:.2} x {:.2}, best single-frame length {:.2} m",
            track.id,
            track.len(),
            b.length,
            b.width,
            b.height,
            visible
        );
    }
    Ok(())
}
