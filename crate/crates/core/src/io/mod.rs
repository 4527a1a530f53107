//! On-disk formats: dataset directories, label files and query files.
//!
//! A dataset is a directory holding `manifest.toml` plus raw little-endian
//! `f32` blobs. Labels and queries are line-oriented text.

mod dataset;
mod labels;
mod queries;

pub use dataset::{
    read_f32_file, write_f32_file, CameraEntry, CoordinateFrame, Dataset, FrameEntry, Manifest, MANIFEST_FILE,
    MANIFEST_VERSION,
};
pub use labels::{read_labels, write_labels, LabelFile, LabelRecord, UNASSIGNED};
pub use queries::{read_queries, write_queries};
