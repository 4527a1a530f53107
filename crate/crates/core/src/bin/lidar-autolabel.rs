use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lidar_autolabel::commands;
use lidar_autolabel::config::{PipelineConfig, DEFAULT_CONFIG_TOML};

#[derive(Parser)]
#[command(version, about = "Unsupervised LiDAR auto-labeling")]
struct Cli {
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Config override `key=value` (TOML literal), repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a named scene.
    Synth {
        /// urban-mini, drive-by, follow, crowd, dropout or empty.
        #[arg(long)]
        preset: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Store camera feature maps instead of per-point features.
        #[arg(long)]
        camera: bool,
    },
    /// Estimate scene flow and store it in the dataset.
    Flow {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Produce amodal, tracked boxes.
    Autolabel {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Name labeled boxes with text queries.
    Query {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Query file; the dataset's own is used when omitted.
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score labels against ground truth.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Ground-truth file; the dataset's own is used when omitted.
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Writes `<out>.txt` and `<out>.kv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a dataset.
    Inspect {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        frame: Option<usize>,
    },
    /// Print the effective configuration (or the annotated defaults).
    Config {
        #[arg(long)]
        defaults: bool,
    },
}

fn run(cli: Cli) -> lidar_autolabel::Result<String> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    for o in &cli.overrides {
        cfg.set(o)?;
    }
    match cli.command {
        Command::Synth { preset, seed, out, camera } => commands::synth(&preset, seed, &out, camera),
        Command::Flow { dataset } => commands::flow(&dataset, &cfg),
        Command::Autolabel { dataset, out } => commands::autolabel(&dataset, &cfg, &out),
        Command::Query {
            dataset,
            labels,
            queries,
            out,
        } => commands::query(&dataset, &labels, queries.as_deref(), &cfg, &out),
        Command::Eval { dataset, labels, gt, out } => {
            commands::eval(&dataset, &labels, gt.as_deref(), &cfg, out.as_deref())
        }
        Command::Inspect { dataset, frame } => commands::inspect(&dataset, frame),
        Command::Config { defaults } => Ok(if defaults {
            DEFAULT_CONFIG_TOML.to_string()
        } else {
            cfg.to_toml()
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global() {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
