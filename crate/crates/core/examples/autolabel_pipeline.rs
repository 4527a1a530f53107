//! The full on-disk workflow: synthesize a dataset, estimate flow,
//! auto-label, assign categories from text queries and evaluate.
//!
//! ```bash
//! cargo run --release --example autolabel_pipeline
//! ```

use lidar_autolabel::commands;
use lidar_autolabel::config::PipelineConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let data = dir.path().join("urban");
    let labels = dir.path().join("labels.txt");
    let named = dir.path().join("named.txt");

    let mut cfg = PipelineConfig::default();
    cfg.eps_sf = 0.0; // label static objects too

    println!("{}", commands::synth("urban-mini", 7, &data, false)?);
    println!("{}", commands::flow(&data, &cfg)?);
    println!("{}", commands::autolabel(&data, &cfg, &labels)?);
    println!("{}", commands::query(&data, &labels, None, &cfg, &named)?);
    let report = commands::evaluate(&data, &named, None, &cfg)?;
    println!("{}", report.to_table());
    Ok(())
}
