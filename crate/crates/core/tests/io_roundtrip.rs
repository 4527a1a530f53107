//! On-disk dataset, label and query formats.

use std::fs;

use lidar_autolabel::flow::FlowField;
use lidar_autolabel::frame::Frame;
use lidar_autolabel::geometry::{Point3, Pose, Vector3};
use lidar_autolabel::io::{read_queries, write_queries, Dataset, MANIFEST_FILE, MANIFEST_VERSION};
use lidar_autolabel::semantics::{EmbeddingSet, TextQuery};
use lidar_autolabel::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Values exactly representable in f32, so storage as f32 is lossless.
fn f32_value(rng: &mut ChaCha8Rng, range: f32) -> f64 {
    rng.random_range(-range..range) as f64
}

fn random_frame(index: usize, n: usize, dim: usize, rng: &mut ChaCha8Rng) -> Frame {
    let pose = Pose::from_yaw(rng.random_range(-3.0..3.0), Vector3::new(rng.random_range(-9.0..9.0), 2.5, 0.0));
    let points = (0..n)
        .map(|_| Point3::new(f32_value(rng, 80.0), f32_value(rng, 80.0), f32_value(rng, 5.0)))
        .collect();
    let mut f = Frame::new(index, index as f64 * 0.1, pose, points);
    let emb: Vec<f32> = (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    f.embeddings = Some(EmbeddingSet::new(dim, emb).unwrap());
    f
}

fn write_dataset(dir: &std::path::Path, frames: &[Frame], dim: usize) -> Dataset {
    let mut ds = Dataset::create(dir, 0.1, dim).unwrap();
    for f in frames {
        ds.save_frame(f, &[]).unwrap();
    }
    ds.write_manifest().unwrap();
    ds
}

#[test]
fn save_then_load_is_bit_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dir = tempfile::tempdir().unwrap();
    let frames: Vec<Frame> = (0..3).map(|i| random_frame(i, 100 + 37 * i, 8, &mut rng)).collect();
    let mut ds = write_dataset(dir.path(), &frames, 8);
    let flows: Vec<FlowField> = frames
        .iter()
        .map(|f| {
            let v = (0..f.len())
                .map(|_| Vector3::new(f32_value(&mut rng, 10.0), f32_value(&mut rng, 10.0), 0.0))
                .collect();
            FlowField::from_vectors(v, 0.1).unwrap()
        })
        .collect();
    ds.set_flow(&flows).unwrap();
    ds.write_manifest().unwrap();

    let back = Dataset::open(dir.path()).unwrap().load_frames().unwrap();
    assert_eq!(back.len(), frames.len());
    for ((a, b), flow) in frames.iter().zip(&back).zip(&flows) {
        assert_eq!(a.index, b.index);
        assert_eq!(a.timestamp.to_bits(), b.timestamp.to_bits());
        assert_eq!(a.ego_pose.to_row_major().map(f64::to_bits), b.ego_pose.to_row_major().map(f64::to_bits));
        assert_eq!(a.points, b.points);
        assert_eq!(a.embeddings, b.embeddings);
        assert_eq!(Some(flow), b.flow.as_ref());
    }
    // Opening through the manifest path is equivalent.
    let again = Dataset::open(&dir.path().join(MANIFEST_FILE)).unwrap().load_frame(1).unwrap();
    assert_eq!(again, back[1]);
}

#[test]
fn truncated_points_file_names_the_file() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &[random_frame(0, 50, 4, &mut rng)], 4);
    let file = dir.path().join("frame_000000.points.f32");
    let bytes = fs::read(&file).unwrap();
    fs::write(&file, &bytes[..bytes.len() - 6]).unwrap();
    let err = Dataset::open(dir.path()).and_then(|d| d.load_frame(0)).unwrap_err();
    match &err {
        Error::SizeMismatch { path, expected, found } => {
            assert_eq!(path, &file);
            assert_eq!((*expected, *found), (600, 594));
        }
        other => panic!("unexpected error {other}"),
    }
    assert!(err.to_string().contains("frame_000000.points.f32"));
}

#[test]
fn newer_manifest_version_is_rejected_before_reading() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &[random_frame(0, 10, 4, &mut rng)], 4);
    let manifest = dir.path().join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest).unwrap();
    let bumped = text.replacen(&format!("version = {MANIFEST_VERSION}"), &format!("version = {}", MANIFEST_VERSION + 1), 1);
    assert_ne!(text, bumped);
    // Unknown fields a future version might add must not matter either.
    fs::write(&manifest, format!("{bumped}\nfuture_field = 1\n")).unwrap();
    // Removing the payload proves nothing else is read.
    fs::remove_file(dir.path().join("frame_000000.points.f32")).unwrap();
    match Dataset::open(dir.path()) {
        Err(Error::Version { path, found, expected }) => {
            assert_eq!(path, manifest);
            assert_eq!((found, expected), (MANIFEST_VERSION + 1, MANIFEST_VERSION));
        }
        other => panic!("expected a version error, got {other:?}"),
    }
}

#[test]
fn missing_file_and_bad_manifest_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(Dataset::open(dir.path()), Err(Error::Io { .. })));
    fs::write(dir.path().join(MANIFEST_FILE), "version = 1\nframe_count = \"x\"\n").unwrap();
    assert!(matches!(Dataset::open(dir.path()), Err(Error::Format { .. })));
}

#[test]
fn query_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("queries.tsv");
    let qs = vec![
        TextQuery::new("vehicle", vec!["car".into(), "parked vehicle".into()], vec![vec![1.0, 0.5, -0.25], vec![0.1, 0.2, 0.3]])
            .unwrap(),
        TextQuery::new("vru", vec!["cyclist".into()], vec![vec![-1.0, 1e-7, 3.5]]).unwrap(),
    ];
    write_queries(&path, &qs).unwrap();
    assert_eq!(read_queries(&path).unwrap(), qs);

    fs::write(&path, "vehicle\tcar\t1 2 3\nvru\tperson\t1 2\n").unwrap();
    let err = read_queries(&path).unwrap_err().to_string();
    assert!(err.contains("line 2"), "{err}");
}
