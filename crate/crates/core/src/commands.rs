//! The command-line operations, as library calls. Each one reads and
//! writes files and returns the text it would print.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::evalmetrics::{
    average_precision, clear_mot, fp_breakdown, mean_ap, Detection, GroundTruthBox, Region,
};
use crate::frame::Frame;
use crate::io::{
    read_labels, read_queries, write_labels, write_queries, CameraEntry, Dataset, LabelFile, LabelRecord,
};
use crate::pipeline::{categorize_boxes, compute_flow, fit_feature_pca, run_autolabel, select_background};
use crate::semantics::{PinholeCalibration, TextQuery};
use crate::synth::{generate, preset};

const QUERIES_FILE: &str = "queries.tsv";
const GROUND_TRUTH_FILE: &str = "ground_truth.txt";

/// Image size and focal length of the camera `synth --camera` adds.
const SYNTH_CAMERA: (usize, usize, f64) = (160, 60, 60.0);

/// Writes a generated scene as a dataset directory.
///
/// With `camera`, per-point features are replaced by one forward camera
/// feature map per frame, so loading goes through unprojection.
pub fn synth(preset_name: &str, seed: u64, out: &Path, camera: bool) -> Result<String> {
    let mut spec = preset(preset_name)?;
    if camera {
        let (w, h, f) = SYNTH_CAMERA;
        spec.camera = Some(PinholeCalibration::forward_facing(w, h, f));
    }
    let data = generate(&spec, seed)?;
    let mut ds = Dataset::create(out, data.dt, spec.embedding.dim)?;
    if let Some(cal) = &data.camera {
        ds.manifest.cameras.push(CameraEntry::from_calibration(cal));
    }
    for (i, frame) in data.frames.iter().enumerate() {
        let maps = data.feature_maps.as_ref().map(|m| vec![m[i].clone()]).unwrap_or_default();
        let stored = if camera {
            Frame {
                embeddings: None,
                ..frame.clone()
            }
        } else {
            frame.clone()
        };
        ds.save_frame(&stored, &maps)?;
    }
    let queries: Vec<TextQuery> = data.queries.iter().chain(&data.background_queries).cloned().collect();
    write_queries(&ds.path_of(QUERIES_FILE), &queries)?;
    ds.manifest.queries = Some(QUERIES_FILE.into());
    let gt: Vec<LabelRecord> = data
        .gt_boxes
        .iter()
        .map(|g| LabelRecord {
            frame: g.frame,
            track_id: Some(g.track_id),
            bbox: g.bbox,
            score: 1.0,
            category: Some(data.categories[g.category].clone()),
        })
        .collect();
    write_labels(&ds.path_of(GROUND_TRUTH_FILE), data.frames.len(), &gt)?;
    ds.manifest.ground_truth = Some(GROUND_TRUTH_FILE.into());
    ds.write_manifest()?;
    let points: usize = data.frames.iter().map(Frame::len).sum();
    Ok(format!(
        "wrote {} ({} frames, {} points, {} objects, {} ground-truth boxes)\n",
        out.display(),
        data.frames.len(),
        points,
        spec.objects.len(),
        gt.len()
    ))
}

/// Estimates scene flow for every frame and stores it in the dataset.
pub fn flow(dataset: &Path, cfg: &PipelineConfig) -> Result<String> {
    let mut ds = Dataset::open(dataset)?;
    let frames = ds.load_frames()?;
    let flows = compute_flow(&frames, ds.manifest.dt, cfg)?;
    let moving: usize = flows
        .iter()
        .map(|f| f.vectors.iter().filter(|v| v.norm() >= cfg.eps_sf).count())
        .sum();
    ds.set_flow(&flows)?;
    ds.write_manifest()?;
    Ok(format!(
        "flow for {} frames written to {}; {} points at or above {} m/s\n",
        flows.len(),
        ds.dir.display(),
        moving,
        cfg.eps_sf
    ))
}

fn dataset_queries(ds: &Dataset, explicit: Option<&Path>) -> Result<Vec<TextQuery>> {
    match (explicit, &ds.manifest.queries) {
        (Some(p), _) => read_queries(p),
        (None, Some(name)) => read_queries(&ds.path_of(name)),
        (None, None) => Ok(Vec::new()),
    }
}

#[derive(Serialize)]
struct FeatureFrame {
    index: usize,
    /// Feature file of the frame, or `"camera"` when features are unprojected.
    features: String,
    kept_offset: usize,
    kept_count: usize,
}

#[derive(Serialize)]
struct FeatureIndex {
    version: u32,
    dataset: String,
    /// Little-endian `u32` point indices of every frame, concatenated.
    kept_points: String,
    frames: Vec<FeatureFrame>,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

/// Runs the full auto-labeling pipeline and writes the label file, plus
/// `<out>.features.toml` / `<out>.kept.u32` referencing the features of the
/// points the labels were built from.
pub fn autolabel(dataset: &Path, cfg: &PipelineConfig, out: &Path) -> Result<String> {
    let ds = Dataset::open(dataset)?;
    let frames = ds.load_frames()?;
    let queries = dataset_queries(&ds, None)?;
    let result = run_autolabel(&frames, &queries, ds.manifest.dt, cfg)?;
    let records: Vec<LabelRecord> = result
        .labels
        .iter()
        .map(|l| LabelRecord {
            frame: l.frame,
            track_id: Some(l.track_id),
            bbox: l.bbox,
            score: l.score,
            category: None,
        })
        .collect();
    write_labels(out, frames.len(), &records)?;

    let kept_path = sibling(out, ".kept.u32");
    let mut bytes = Vec::new();
    let mut index = FeatureIndex {
        version: 1,
        dataset: ds.manifest_path().display().to_string(),
        kept_points: kept_path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        frames: Vec::new(),
    };
    for (i, kept) in result.kept_points.iter().enumerate() {
        let entry = &ds.manifest.frames[i];
        index.frames.push(FeatureFrame {
            index: i,
            features: match (&entry.embeddings, entry.feature_maps.is_empty()) {
                (Some(name), _) => name.clone(),
                (None, false) => "camera".into(),
                (None, true) => "none".into(),
            },
            kept_offset: bytes.len() / 4,
            kept_count: kept.len(),
        });
        for &k in kept {
            let k = u32::try_from(k).map_err(|_| Error::Pipeline("point index exceeds u32".into()))?;
            bytes.extend_from_slice(&k.to_le_bytes());
        }
    }
    fs::write(&kept_path, bytes).map_err(|e| Error::io(&kept_path, e))?;
    let index_path = sibling(out, ".features.toml");
    let text = toml::to_string(&index).map_err(|e| Error::format(&index_path, e.to_string()))?;
    fs::write(&index_path, text).map_err(|e| Error::io(&index_path, e))?;

    Ok(format!(
        "{} labels in {} tracks written to {} ({} tracks before filtering)\n",
        records.len(),
        result.track_ids().len(),
        out.display(),
        result.tracks.len()
    ))
}

/// Object queries from the configured query sets: each set keeps the
/// prompts of its category that it lists.
fn object_queries(available: &[TextQuery], cfg: &PipelineConfig) -> Result<Vec<TextQuery>> {
    cfg.query_sets
        .iter()
        .map(|set| {
            let q = available
                .iter()
                .find(|q| q.category == set.category)
                .ok_or_else(|| Error::Pipeline(format!("no embeddings for query category `{}`", set.category)))?;
            let (prompts, embs): (Vec<String>, Vec<Vec<f32>>) = q
                .prompts
                .iter()
                .zip(q.embeddings())
                .filter(|(p, _)| set.prompts.contains(p))
                .map(|(p, e)| (p.clone(), e.clone()))
                .unzip();
            if prompts.is_empty() {
                return Err(Error::Pipeline(format!(
                    "none of the prompts of query category `{}` have embeddings",
                    set.category
                )));
            }
            TextQuery::new(set.category.clone(), prompts, embs)
        })
        .collect()
}

/// Assigns each label a category by majority vote over its points.
pub fn query(
    dataset: &Path,
    labels: &Path,
    queries: Option<&Path>,
    cfg: &PipelineConfig,
    out: &Path,
) -> Result<String> {
    let ds = Dataset::open(dataset)?;
    let available = dataset_queries(&ds, queries)?;
    if available.is_empty() {
        return Err(Error::EmptyQueries);
    }
    let mut objects = object_queries(&available, cfg)?;
    let mut background: Vec<TextQuery> = select_background(&available, cfg).into_iter().cloned().collect();
    let mut frames = ds.load_frames()?;
    if let Some(pca) = fit_feature_pca(&frames, cfg)? {
        for f in &mut frames {
            if let Some(e) = &f.embeddings {
                f.embeddings = Some(pca.transform_embeddings(e)?);
            }
        }
        objects = objects.iter().map(|q| pca.transform_query(q)).collect::<Result<_>>()?;
        background = background.iter().map(|q| pca.transform_query(q)).collect::<Result<_>>()?;
    }
    let file = read_labels(labels)?;
    let boxes: Vec<_> = file.records.iter().map(|r| (r.frame, r.bbox)).collect();
    let cats = categorize_boxes(&boxes, &frames, &objects, &background)?;
    let records: Vec<LabelRecord> = file
        .records
        .iter()
        .zip(&cats)
        .map(|(r, c)| LabelRecord {
            category: c.map(|k| objects[k].category.clone()),
            ..r.clone()
        })
        .collect();
    write_labels(out, file.frame_count.unwrap_or(frames.len()), &records)?;
    let mut msg = format!("{} labels categorized into {}\n", records.len(), out.display());
    for (k, q) in objects.iter().enumerate() {
        let n = cats.iter().filter(|c| **c == Some(k)).count();
        writeln!(msg, "  {:<12} {n}", q.category).expect("write to string");
    }
    let none = cats.iter().filter(|c| c.is_none()).count();
    writeln!(msg, "  {:<12} {none}", crate::io::UNASSIGNED).expect("write to string");
    Ok(msg)
}

/// Metrics of one evaluation run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// `(key, value)` in report order.
    pub entries: Vec<(String, f64)>,
}

impl EvalReport {
    pub fn get(&self, key: &str) -> Option<f64> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    fn value_text(v: f64) -> String {
        if v.is_nan() {
            "nan".into()
        } else if v.fract() == 0.0 && v.abs() < 1e15 {
            format!("{v:.0}")
        } else {
            format!("{v:.6}")
        }
    }

    /// One `key=value` line per entry.
    pub fn to_key_values(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k}={}\n", Self::value_text(*v)))
            .collect()
    }

    /// Aligned two-column table.
    pub fn to_table(&self) -> String {
        let width = self.entries.iter().map(|(k, _)| k.len()).max().unwrap_or(6).max(6);
        let mut out = format!("{:<width$}  value\n", "metric");
        for (k, v) in &self.entries {
            writeln!(out, "{k:<width$}  {}", Self::value_text(*v)).expect("write to string");
        }
        out
    }
}

fn check_alignment(file: &LabelFile, what: &str, frames: usize) -> Result<()> {
    let mut bad: BTreeSet<usize> = file.records.iter().map(|r| r.frame).filter(|f| *f >= frames).collect();
    if let Some(n) = file.frame_count {
        if n != frames {
            return Err(Error::Pipeline(format!(
                "{what} declares {n} frames but the dataset has {frames}"
            )));
        }
    }
    if !bad.is_empty() {
        let list: Vec<String> = std::mem::take(&mut bad).iter().map(|f| f.to_string()).collect();
        return Err(Error::Pipeline(format!(
            "{what} references frames outside the dataset ({frames} frames): {}",
            list.join(", ")
        )));
    }
    Ok(())
}

/// Scores labels against ground truth inside the evaluation region.
///
/// Categories are indexed in query-set order, followed by any other names
/// found in either file in sorted order. AP is reported per ground-truth
/// category, as the mean over those, and class-agnostic; CLEAR-MOT is
/// class-agnostic; the FP taxonomy uses the first IoU threshold.
pub fn evaluate(
    dataset: &Path,
    labels: &Path,
    ground_truth: Option<&Path>,
    cfg: &PipelineConfig,
) -> Result<EvalReport> {
    let ds = Dataset::open(dataset)?;
    let gt_path = match (ground_truth, &ds.manifest.ground_truth) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(name)) => ds.path_of(name),
        (None, None) => return Err(Error::Pipeline("no ground truth given and none listed in the manifest".into())),
    };
    let dets_file = read_labels(labels)?;
    let gt_file = read_labels(&gt_path)?;
    check_alignment(&dets_file, "labels", ds.len())?;
    check_alignment(&gt_file, "ground truth", ds.len())?;

    let mut names: Vec<String> = cfg.query_sets.iter().map(|q| q.category.clone()).collect();
    let extra: BTreeSet<&String> = dets_file
        .records
        .iter()
        .chain(&gt_file.records)
        .filter_map(|r| r.category.as_ref())
        .filter(|c| !names.contains(c))
        .collect();
    names.extend(extra.into_iter().cloned());
    let index_of = |c: &Option<String>| c.as_ref().and_then(|c| names.iter().position(|n| n == c));

    let region = Region::new(cfg.region_length, cfg.region_width, &ds.ego_poses()?);
    let inside = |frame: usize, b: &crate::geometry::Box7| region.contains(frame, &b.center());
    let dets: Vec<Detection> = dets_file
        .records
        .iter()
        .filter(|r| inside(r.frame, &r.bbox))
        .map(|r| Detection {
            bbox: r.bbox,
            score: r.score,
            category: index_of(&r.category),
            frame: r.frame,
            track_id: r.track_id,
        })
        .collect();
    let gts: Vec<GroundTruthBox> = gt_file
        .records
        .iter()
        .filter(|r| inside(r.frame, &r.bbox))
        .map(|r| {
            Ok(GroundTruthBox {
                bbox: r.bbox,
                category: index_of(&r.category),
                frame: r.frame,
                track_id: r
                    .track_id
                    .ok_or_else(|| Error::format(&gt_path, format!("ground-truth box in frame {} has no track id", r.frame)))?,
            })
        })
        .collect::<Result<_>>()?;

    let gt_categories: BTreeSet<usize> = gts.iter().filter_map(|g| g.category).collect();
    let agnostic_d: Vec<Detection> = dets.iter().map(|d| Detection { category: None, ..*d }).collect();
    let agnostic_g: Vec<GroundTruthBox> = gts.iter().map(|g| GroundTruthBox { category: None, ..*g }).collect();

    let mut entries = vec![
        ("frames".to_string(), ds.len() as f64),
        ("detections".to_string(), dets.len() as f64),
        ("ground_truth".to_string(), gts.len() as f64),
    ];
    for &thr in &cfg.iou_thresholds {
        let mut aps = Vec::new();
        for &c in &gt_categories {
            let d: Vec<Detection> = dets.iter().filter(|d| d.category == Some(c)).copied().collect();
            let g: Vec<GroundTruthBox> = gts.iter().filter(|g| g.category == Some(c)).copied().collect();
            let ap = average_precision(&d, &g, thr, None);
            entries.push((format!("ap@{thr:.2}/{}", names[c]), ap));
            aps.push(ap);
        }
        if !aps.is_empty() {
            entries.push((format!("map@{thr:.2}"), mean_ap(&aps)?));
        }
        entries.push((format!("ap@{thr:.2}/agnostic"), average_precision(&agnostic_d, &agnostic_g, thr, None)));
    }
    let mot = clear_mot(&agnostic_d, &agnostic_g, cfg.mot_iou);
    entries.extend([
        ("mota".to_string(), mot.mota),
        ("motp".to_string(), mot.motp),
        ("mot_matches".to_string(), mot.matches as f64),
        ("mot_misses".to_string(), mot.misses as f64),
        ("mot_false_positives".to_string(), mot.false_positives as f64),
        ("mot_id_switches".to_string(), mot.id_switches as f64),
    ]);
    let fp = fp_breakdown(&dets, &gts, cfg.iou_thresholds[0], cfg.fp_min_overlap);
    entries.extend([
        ("fp_localization".to_string(), fp.localization as f64),
        ("fp_confusion_other".to_string(), fp.confusion_other as f64),
        ("fp_confusion_background".to_string(), fp.confusion_background as f64),
    ]);
    Ok(EvalReport { entries })
}

/// [`evaluate`], writing `<out>.txt` (table) and `<out>.kv` when `out` is
/// given; returns the table.
pub fn eval(
    dataset: &Path,
    labels: &Path,
    ground_truth: Option<&Path>,
    cfg: &PipelineConfig,
    out: Option<&Path>,
) -> Result<String> {
    let report = evaluate(dataset, labels, ground_truth, cfg)?;
    let table = report.to_table();
    if let Some(prefix) = out {
        let txt = sibling(prefix, ".txt");
        fs::write(&txt, &table).map_err(|e| Error::io(&txt, e))?;
        let kv = sibling(prefix, ".kv");
        fs::write(&kv, report.to_key_values()).map_err(|e| Error::io(&kv, e))?;
    }
    Ok(table)
}

/// Manifest summary, plus point statistics for one frame when asked.
pub fn inspect(dataset: &Path, frame: Option<usize>) -> Result<String> {
    let ds = Dataset::open(dataset)?;
    let m = &ds.manifest;
    let mut out = String::new();
    let w = &mut out;
    let opt = |o: &Option<String>| o.clone().unwrap_or_else(|| "-".into());
    writeln!(w, "manifest        {}", ds.manifest_path().display()).ok();
    writeln!(w, "version         {}", m.version).ok();
    writeln!(w, "frames          {}", m.frame_count).ok();
    writeln!(w, "dt              {}", m.dt).ok();
    writeln!(w, "embedding_dim   {}", m.embedding_dim).ok();
    writeln!(w, "coordinates     {:?}", m.coordinate_frame).ok();
    writeln!(w, "cameras         {}", m.cameras.len()).ok();
    writeln!(w, "queries         {}", opt(&m.queries)).ok();
    writeln!(w, "ground_truth    {}", opt(&m.ground_truth)).ok();
    writeln!(w, "total_points    {}", m.frames.iter().map(|f| f.num_points).sum::<usize>()).ok();
    writeln!(w, "\nframe  timestamp  points  features  flow").ok();
    for f in &m.frames {
        let features = match (&f.embeddings, f.feature_maps.len()) {
            (Some(_), _) => "points".to_string(),
            (None, 0) => "-".to_string(),
            (None, n) => format!("{n} maps"),
        };
        writeln!(
            w,
            "{:>5}  {:>9.3}  {:>6}  {:>8}  {}",
            f.index,
            f.timestamp,
            f.num_points,
            features,
            if f.flow.is_some() { "yes" } else { "-" }
        )
        .ok();
    }
    if let Some(i) = frame {
        let fr = ds.load_frame(i)?;
        writeln!(w, "\nframe {i}").ok();
        if let Some(first) = fr.points.first() {
            let (mut lo, mut hi) = (*first, *first);
            for p in &fr.points {
                for a in 0..3 {
                    lo[a] = lo[a].min(p[a]);
                    hi[a] = hi[a].max(p[a]);
                }
            }
            writeln!(w, "  bounds min     {:.3} {:.3} {:.3}", lo.x, lo.y, lo.z).ok();
            writeln!(w, "  bounds max     {:.3} {:.3} {:.3}", hi.x, hi.y, hi.z).ok();
        }
        let t = fr.ego_pose.translation();
        writeln!(w, "  ego position   {:.3} {:.3} {:.3}", t.x, t.y, t.z).ok();
        writeln!(w, "  ego heading    {:.4}", fr.ego_heading()).ok();
        if let Some(flow) = &fr.flow {
            let speeds: Vec<f64> = flow.vectors.iter().map(|v| v.norm()).collect();
            let max = speeds.iter().copied().fold(0.0, f64::max);
            let mean = if speeds.is_empty() { 0.0 } else { speeds.iter().sum::<f64>() / speeds.len() as f64 };
            writeln!(w, "  flow speed     mean {mean:.3} max {max:.3} m/s").ok();
        }
    }
    Ok(out)
}
