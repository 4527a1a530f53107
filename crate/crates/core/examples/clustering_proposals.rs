//! Spatio-temporal clustering of fast points and per-cluster box proposals.
//!
//! ```bash
//! cargo run --release --example clustering_proposals
//! ```

use lidar_autolabel::config::PipelineConfig;
use lidar_autolabel::flow::speed_mask;
use lidar_autolabel::pipeline::compute_flow;
use lidar_autolabel::proposals::{propose_boxes, st_cluster};
use lidar_autolabel::semantics::background_mask;
use lidar_autolabel::synth::{generate, preset};

fn main() -> lidar_autolabel::Result<()> {
    let ds = generate(&preset("urban-mini")?, 7)?;
    let cfg = PipelineConfig::default();
    let flows = compute_flow(&ds.frames[..2], ds.dt, &cfg)?;
    let frame = &ds.frames[0];

    // Keep points moving faster than eps_sf.
    let fast = speed_mask(&flows[0], cfg.eps_sf);
    let points: Vec<_> = frame.points.iter().zip(&fast.0).filter(|(_, m)| **m).map(|(p, _)| *p).collect();
    let flow = flows[0].select(&fast.0);
    let emb = frame.embeddings.as_ref().expect("synthetic frames carry features").select(&fast.0);
    let bg = background_mask(&emb, &ds.background_queries, cfg.eps_bg)?;
    println!("{} of {} points are fast, {} of those look like background", points.len(), frame.len(), bg.count());

    let labeling = st_cluster(&points, Some(&flow), Some(&emb), &cfg.cluster_params())?;
    let proposals = propose_boxes(&labeling, &points, &bg, &flow, &cfg.proposal_params(), frame.ego_heading())?;
    println!("{} clusters, {} proposals", labeling.members().len(), proposals.len());
    for p in &proposals {
        let b = p.bbox;
        let c = b.center();
        println!(
            "  ({:6.2}, {:6.2})  {:.2} x {:.2} x {:.2}  heading {:5.2}  {:4} points  speed {:.1} m/s",
            c.x,
            c.y,
            b.length,
            b.width,
            b.height,
            b.heading,
            p.point_indices.len(),
            p.mean_flow.norm()
        );
    }
    for g in ds.gt_boxes.iter().filter(|g| g.frame == 0) {
        let c = g.bbox.center();
        println!("  truth: ({:6.2}, {:6.2})  {}", c.x, c.y, ds.categories[g.category]);
    }
    Ok(())
}
