//! Per-point features: camera unprojection, text-query similarity,
//! background masking, category votes and PCA compression.
//!
//! ```bash
//! cargo run --example open_vocabulary
//! ```

use lidar_autolabel::semantics::{
    assign_point_categories, background_mask, pca_fit, unproject_pixel_features, CameraView, PinholeCalibration,
};
use lidar_autolabel::synth::{generate, preset, PointSource};

fn main() -> lidar_autolabel::Result<()> {
    let mut spec = preset("urban-mini")?;
    spec.camera = Some(PinholeCalibration::forward_facing(160, 60, 60.0));
    let ds = generate(&spec, 7)?;
    let frame = &ds.frames[0];
    let emb = frame.embeddings.as_ref().expect("synthetic frames carry features");

    // Gather the rendered feature image back onto the points.
    let cal = ds.camera.clone().expect("camera requested");
    let image = ds.feature_maps.as_ref().expect("camera requested")[0].clone();
    let sensor = frame.sensor_points();
    let (gathered, visible) = unproject_pixel_features(
        &sensor,
        &[CameraView {
            calibration: cal,
            features: image,
        }],
    )?;
    println!(
        "camera sees {} of {} points ({}-d features)",
        visible.iter().filter(|v| **v).count(),
        frame.len(),
        gathered.dim()
    );

    let bg = background_mask(emb, &ds.background_queries, 0.02)?;
    let is_bg_source = |s: &PointSource| matches!(s, PointSource::Background(_) | PointSource::Ground);
    let caught = bg.0.iter().zip(&ds.sources[0]).filter(|(m, s)| **m && is_bg_source(s)).count();
    let wrong = bg.0.iter().zip(&ds.sources[0]).filter(|(m, s)| **m && !is_bg_source(s)).count();
    println!("background mask: {} points ({caught} scenery, {wrong} objects)", bg.count());

    let votes = assign_point_categories(emb, &ds.queries)?;
    for (o, _) in spec.objects.iter().enumerate() {
        let idx = ds.object_points(0, o);
        let mut tally = vec![0usize; ds.queries.len()];
        for &i in &idx {
            if let Some(c) = votes[i].category {
                tally[c] += 1;
            }
        }
        let names: Vec<String> = ds.queries.iter().zip(&tally).map(|(q, n)| format!("{}={n}", q.category)).collect();
        println!("object {o}: {} points, votes {}", idx.len(), names.join(" "));
    }

    let model = pca_fit(emb.rows(), emb.dim(), 16)?;
    let reduced = model.transform_embeddings(emb)?;
    println!("PCA: {} -> {} dimensions", model.input_dim(), reduced.dim());
    Ok(())
}
