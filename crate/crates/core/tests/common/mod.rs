//! Independent reference implementations used by the integration tests.
//! Each one is written for clarity, not speed, and shares no code with the
//! library routine it checks.

#![allow(dead_code)]

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lidar_autolabel::flow::FlowField;
use lidar_autolabel::geometry::{Box7, Point3, Pose, SpatialIndex, Vector3};
use lidar_autolabel::registration::{icp, IcpParams};
use lidar_autolabel::semantics::{EmbeddingSet, TextQuery};
use proptest::prelude::*;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_box(rng: &mut ChaCha8Rng, spread: f64) -> Box7 {
    Box7::new(
        Point3::new(
            rng.random_range(-spread..spread),
            rng.random_range(-spread..spread),
            rng.random_range(-spread / 2.0..spread / 2.0),
        ),
        rng.random_range(0.5..4.0),
        rng.random_range(0.5..4.0),
        rng.random_range(0.5..3.0),
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
    )
    .expect("positive extents")
}

/// Point membership test from the box definition: rotate into the box frame
/// and compare against the half extents.
fn inside(b: &Box7, p: &Point3) -> bool {
    let (s, c) = b.heading.sin_cos();
    let (dx, dy) = (p.x - b.cx, p.y - b.cy);
    let lx = c * dx + s * dy;
    let ly = -s * dx + c * dy;
    lx.abs() <= b.length / 2.0 && ly.abs() <= b.width / 2.0 && (p.z - b.cz).abs() <= b.height / 2.0
}

fn aabb(b: &Box7) -> ([f64; 3], [f64; 3]) {
    let (s, c) = b.heading.sin_cos();
    let hx = (c * b.length).abs() / 2.0 + (s * b.width).abs() / 2.0;
    let hy = (s * b.length).abs() / 2.0 + (c * b.width).abs() / 2.0;
    (
        [b.cx - hx, b.cy - hy, b.cz - b.height / 2.0],
        [b.cx + hx, b.cy + hy, b.cz + b.height / 2.0],
    )
}

/// Monte-Carlo 3D IoU: uniform samples in the bounding volume of both boxes.
pub fn monte_carlo_iou(a: &Box7, b: &Box7, samples: usize, rng: &mut ChaCha8Rng) -> f64 {
    let (lo_a, hi_a) = aabb(a);
    let (lo_b, hi_b) = aabb(b);
    let lo: Vec<f64> = (0..3).map(|k| lo_a[k].min(lo_b[k])).collect();
    let hi: Vec<f64> = (0..3).map(|k| hi_a[k].max(hi_b[k])).collect();
    let (mut both, mut either) = (0usize, 0usize);
    for _ in 0..samples {
        let p = Point3::new(
            rng.random_range(lo[0]..hi[0]),
            rng.random_range(lo[1]..hi[1]),
            rng.random_range(lo[2]..hi[2]),
        );
        let (ia, ib) = (inside(a, &p), inside(b, &p));
        both += usize::from(ia && ib);
        either += usize::from(ia || ib);
    }
    if either == 0 {
        0.0
    } else {
        both as f64 / either as f64
    }
}

/// Textbook O(n²) DBSCAN: neighbors within `eps` (self included), core when
/// at least `min_pts` neighbors, clusters are connected core components
/// numbered by their lowest core index, a border point joins the cluster of
/// its lowest-index core neighbor.
pub fn brute_dbscan(points: &[Point3], eps: f64, min_pts: usize) -> (Vec<Option<usize>>, usize) {
    let n = points.len();
    let nbrs: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| (points[i] - points[j]).norm() <= eps).collect())
        .collect();
    let core: Vec<bool> = nbrs.iter().map(|v| v.len() >= min_pts).collect();
    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut next = 0;
    for seed in 0..n {
        if !core[seed] || label[seed].is_some() {
            continue;
        }
        label[seed] = Some(next);
        let mut stack = vec![seed];
        while let Some(i) = stack.pop() {
            for &j in &nbrs[i] {
                if core[j] && label[j].is_none() {
                    label[j] = Some(next);
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    for i in 0..n {
        if !core[i] {
            label[i] = nbrs[i].iter().filter(|&&j| core[j]).min().and_then(|&j| label[j]);
        }
    }
    (label, next)
}

/// Greedy NMS defined through subsets: among all subsets with pairwise IoU
/// below the threshold, the one whose rank-ordered membership vector is
/// lexicographically greatest (the best box is always kept, then the next
/// best compatible one, and so on). Returns kept indices in rank order.
pub fn subset_nms(boxes: &[Box7], scores: &[f64], thr: f64, iou: impl Fn(&Box7, &Box7) -> f64) -> Vec<usize> {
    let n = boxes.len();
    let mut rank: Vec<usize> = (0..n).collect();
    rank.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut best: Option<Vec<bool>> = None;
    for mask in 0u32..(1u32 << n) {
        let chosen: Vec<bool> = rank.iter().map(|&i| mask & (1 << i) != 0).collect();
        let members: Vec<usize> = (0..n).filter(|&r| chosen[r]).map(|r| rank[r]).collect();
        let independent = members
            .iter()
            .enumerate()
            .all(|(k, &a)| members[k + 1..].iter().all(|&b| iou(&boxes[a], &boxes[b]) < thr));
        if independent && best.as_ref().is_none_or(|b| chosen > *b) {
            best = Some(chosen);
        }
    }
    let best = best.unwrap_or_default();
    (0..n).filter(|&r| best[r]).map(|r| rank[r]).collect()
}

/// Smallest-area BEV rectangle by sweeping the orientation in `step` rad
/// over a quarter turn. Returns (area, angle).
pub fn sweep_min_area(points: &[Point3], step: f64) -> (f64, f64) {
    let mut best = (f64::INFINITY, 0.0);
    let steps = (std::f64::consts::FRAC_PI_2 / step).ceil() as usize;
    for k in 0..=steps {
        let a = k as f64 * step;
        let (s, c) = a.sin_cos();
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in points {
            let u = c * p.x + s * p.y;
            let v = -s * p.x + c * p.y;
            x0 = x0.min(u);
            x1 = x1.max(u);
            y0 = y0.min(v);
            y1 = y1.max(v);
        }
        let area = (x1 - x0) * (y1 - y0);
        if area < best.0 {
            best = (area, a);
        }
    }
    best
}

/// Eigenvalues (descending) of the 1/N covariance of `rows`.
pub fn covariance_eigenvalues(rows: &[Vec<f32>]) -> Vec<f64> {
    let n = rows.len();
    let d = rows[0].len();
    let x = DMatrix::from_fn(n, d, |i, j| rows[i][j] as f64);
    let mean = x.row_mean();
    let centered = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
    let cov = centered.transpose() * &centered / n as f64;
    let mut ev: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Closed surface of a 4.4 x 1.8 x 1.5 m box.
pub fn registration_cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3> {
    (0..n)
        .map(|i| {
            let (x, y, z) = (rng.random_range(-2.2..2.2), rng.random_range(-0.9..0.9), rng.random_range(0.0..1.5));
            let far = i % 2 == 0;
            match i % 3 {
                0 => Point3::new(if far { 2.2 } else { -2.2 }, y, z),
                1 => Point3::new(x, if far { 0.9 } else { -0.9 }, z),
                _ => Point3::new(x, y, if far { 1.5 } else { 0.0 }),
            }
        })
        .collect()
}

/// ICP recovery check for one random motion; returns (translation error m,
/// yaw error deg).
pub fn icp_trial(rng: &mut ChaCha8Rng, params: &IcpParams) -> (f64, f64) {
    let src = registration_cloud(rng, 600);
    let t = loop {
        let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if v.norm() <= 1.0 {
            break v;
        }
    };
    let yaw = rng.random_range(-30f64..30.0).to_radians();
    let truth = Pose::from_yaw(yaw, t);
    let dst: Vec<Point3> = src.iter().map(|p| truth.transform_point(p)).collect();
    let r = icp(&src, &SpatialIndex::new(&dst), Pose::identity(), params);
    let dt = (r.pose.translation() - truth.translation()).norm();
    let dyaw = (r.pose.yaw() - yaw).to_degrees().abs();
    (dt, dyaw)
}

pub const BIN: &str = env!("CARGO_BIN_EXE_lidar-autolabel");

pub fn run(args: &[&str]) -> Output {
    let out = Command::new(BIN).args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// Every file directly in `dir` with its bytes, in name order. Text files
/// have `root` replaced by a placeholder since they may record paths.
pub fn snapshot(dir: &Path, root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            let bytes = fs::read(&p).unwrap();
            let bytes = match String::from_utf8(bytes) {
                Ok(text) => text.replace(s(root), "<root>").into_bytes(),
                Err(e) => e.into_bytes(),
            };
            (p.file_name().unwrap().to_string_lossy().into_owned(), bytes)
        })
        .collect();
    files.sort();
    files
}

/// synth → flow → autolabel → query → eval → inspect, with all outputs in
/// `root`; returns the captured stdout of every step.
pub fn chain(root: &Path, preset: &str, workers: &str, extra: &[&str], camera: bool) -> Vec<Vec<u8>> {
    let data = root.join("data");
    let labels = root.join("labels.txt");
    let named = root.join("named.txt");
    let report = root.join("report");
    let with = |mut v: Vec<String>| {
        v.splice(0..0, ["--workers".to_string(), workers.to_string()]);
        v.extend(extra.iter().flat_map(|e| ["--set".to_string(), e.to_string()]));
        v
    };
    let mut synth = vec!["synth", "--preset", preset, "--out", s(&data)];
    if camera {
        synth.push("--camera");
    }
    let steps: Vec<Vec<String>> = vec![
        synth.iter().map(|a| a.to_string()).collect(),
        ["flow", "--dataset", s(&data)].map(String::from).to_vec(),
        ["autolabel", "--dataset", s(&data), "--out", s(&labels)].map(String::from).to_vec(),
        ["query", "--dataset", s(&data), "--labels", s(&labels), "--out", s(&named)].map(String::from).to_vec(),
        ["eval", "--dataset", s(&data), "--labels", s(&named), "--out", s(&report)].map(String::from).to_vec(),
        ["inspect", "--dataset", s(&data), "--frame", "3"].map(String::from).to_vec(),
    ];
    steps
        .into_iter()
        .map(|step| {
            let args = with(step);
            let refs: Vec<&str> = args.iter().map(String::as_str).collect();
            // Paths differ between roots; compare output with them removed.
            String::from_utf8(run(&refs).stdout).unwrap().replace(s(root), "<root>").into_bytes()
        })
        .collect()
}

/// First file, in `a` or its `data` subdirectory, whose contents differ
/// from its counterpart under `b`.
pub fn first_difference(a: &Path, b: &Path) -> Option<String> {
    for sub in ["", "data"] {
        let (x, y) = (snapshot(&a.join(sub), a), snapshot(&b.join(sub), b));
        let names = |v: &[(String, Vec<u8>)]| v.iter().map(|f| f.0.clone()).collect::<Vec<_>>();
        if names(&x) != names(&y) {
            return Some(format!("file list of {sub:?}"));
        }
        if let Some((f, _)) = x.iter().zip(&y).find(|(f, g)| f.1 != g.1) {
            return Some(format!("{sub}/{}", f.0));
        }
    }
    None
}

pub fn embeddings(dim: usize, max_rows: usize) -> impl Strategy<Value = EmbeddingSet> {
    prop::collection::vec(prop::collection::vec(-1.0f32..1.0, dim), 0..max_rows)
        .prop_map(move |rows| EmbeddingSet::from_rows(dim, &rows).unwrap())
}

pub fn queries(dim: usize) -> impl Strategy<Value = Vec<TextQuery>> {
    prop::collection::vec(prop::collection::vec(prop::collection::vec(-1.0f32..1.0, dim), 1..4), 1..4).prop_map(
        |sets| {
            sets.into_iter()
                .enumerate()
                .map(|(i, embs)| {
                    let prompts = (0..embs.len()).map(|k| format!("p{i}_{k}")).collect();
                    TextQuery::new(format!("c{i}"), prompts, embs).unwrap()
                })
                .collect()
        },
    )
}

/// Features plus background queries of a shared random dimension.
pub fn features_and_queries() -> impl Strategy<Value = (EmbeddingSet, Vec<TextQuery>)> {
    (1usize..10).prop_flat_map(|d| (embeddings(d, 40), queries(d)))
}

pub fn flow_vectors() -> impl Strategy<Value = FlowField> {
    prop::collection::vec((-20.0..20.0f64, -20.0..20.0f64, -2.0..2.0f64), 0..60).prop_map(|v| {
        FlowField::from_vectors(v.iter().map(|&(x, y, z)| Vector3::new(x, y, z)).collect(), 0.1).unwrap()
    })
}

/// `strict ⊆ loose` for two masks computed at thresholds `hi >= lo`.
pub fn nested(strict: &[bool], loose: &[bool]) -> bool {
    strict.len() == loose.len() && strict.iter().zip(loose).all(|(s, l)| !s || *l)
}
