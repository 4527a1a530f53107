//! Unsupervised 3D auto-labeling of LiDAR sequences.
//!
//! Points with vision-language features are split into moving and static
//! parts by scene flow, filtered against background text queries,
//! clustered into box proposals, tracked, and turned into amodal boxes by
//! registering each track's points over time. Boxes are then named by
//! majority vote against text queries and scored against ground truth.

pub mod commands;
pub mod config;
pub mod error;
pub mod evalmetrics;
pub mod flow;
pub mod frame;
pub mod geometry;
pub mod io;
pub mod pipeline;
pub mod proposals;
pub mod registration;
pub mod semantics;
pub mod synth;
pub mod tracking;

pub use error::{Error, Result};
