use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::frame::Frame;
use crate::geometry::{Point3, Pose, Vector3};
use crate::semantics::{unproject_pixel_features, CameraView, EmbeddingSet, FeatureMap, PinholeCalibration};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const MANIFEST_VERSION: u32 = 1;

/// Frame in which point and flow arrays are stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordinateFrame {
    World,
    /// Sensor frame of each sweep; mapped to world with the frame's ego pose.
    Sensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraEntry {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// Row-major 3x4 `[R | t]`.
    pub sensor_to_camera: Vec<f64>,
}

impl CameraEntry {
    pub fn from_calibration(c: &PinholeCalibration) -> Self {
        Self {
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            width: c.width,
            height: c.height,
            sensor_to_camera: c.sensor_to_camera.to_row_major().to_vec(),
        }
    }

    pub fn calibration(&self) -> Result<PinholeCalibration> {
        Ok(PinholeCalibration {
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            width: self.width,
            height: self.height,
            sensor_to_camera: Pose::from_row_major(&self.sensor_to_camera)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameEntry {
    pub index: usize,
    pub timestamp: f64,
    /// Sensor-to-world, row-major 3x4 `[R | t]`.
    pub ego_pose: Vec<f64>,
    pub num_points: usize,
    /// `num_points x 3` floats.
    pub points: String,
    /// `num_points x embedding_dim` floats.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<String>,
    /// `num_points x 3` floats, m/s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<String>,
    /// One `height x width x embedding_dim` map per camera, in camera order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub feature_maps: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub frame_count: usize,
    /// Feature dimension; 0 when the dataset carries no features.
    pub embedding_dim: usize,
    /// Seconds between sweeps.
    pub dt: f64,
    pub coordinate_frame: CoordinateFrame,
    /// Text-embedding file (see [`super::read_queries`]).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queries: Option<String>,
    /// Ground-truth labels file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cameras: Vec<CameraEntry>,
    #[serde(default)]
    pub frames: Vec<FrameEntry>,
}

impl Manifest {
    pub fn new(dt: f64, embedding_dim: usize) -> Self {
        Self {
            version: MANIFEST_VERSION,
            frame_count: 0,
            embedding_dim,
            dt,
            coordinate_frame: CoordinateFrame::World,
            queries: None,
            ground_truth: None,
            cameras: Vec::new(),
            frames: Vec::new(),
        }
    }

    fn check(&self, path: &Path) -> Result<()> {
        let bad = |m: String| Err(Error::format(path, m));
        if self.frame_count != self.frames.len() {
            return bad(format!(
                "frame_count is {} but {} frames are listed",
                self.frame_count,
                self.frames.len()
            ));
        }
        if !(self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        for (i, f) in self.frames.iter().enumerate() {
            if f.index != i {
                return bad(format!("frame entry {i} has index {}", f.index));
            }
            if f.ego_pose.len() != 12 {
                return bad(format!("frame {i}: ego_pose needs 12 values, got {}", f.ego_pose.len()));
            }
            if f.embeddings.is_some() && self.embedding_dim == 0 {
                return bad(format!("frame {i} lists embeddings but embedding_dim is 0"));
            }
            if f.feature_maps.len() != 0 && f.feature_maps.len() != self.cameras.len() {
                return bad(format!(
                    "frame {i} lists {} feature maps for {} cameras",
                    f.feature_maps.len(),
                    self.cameras.len()
                ));
            }
        }
        Ok(())
    }
}

/// Writes `values` as little-endian `f32`.
pub fn write_f32_file(path: &Path, values: &[f32]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads a little-endian `f32` file that must hold exactly `expected` values.
pub fn read_f32_file(path: &Path, expected: usize) -> Result<Vec<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let want = expected as u64 * 4;
    if bytes.len() as u64 != want {
        return Err(Error::SizeMismatch {
            path: path.to_path_buf(),
            expected: want,
            found: bytes.len() as u64,
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn points_to_f32(points: &[Point3]) -> Vec<f32> {
    points.iter().flat_map(|p| [p.x as f32, p.y as f32, p.z as f32]).collect()
}

fn vectors_to_f32(v: &[Vector3]) -> Vec<f32> {
    v.iter().flat_map(|p| [p.x as f32, p.y as f32, p.z as f32]).collect()
}

fn f32_to_triples(v: &[f32]) -> Vec<Vector3> {
    v.chunks_exact(3)
        .map(|c| Vector3::new(c[0] as f64, c[1] as f64, c[2] as f64))
        .collect()
}

/// A dataset directory with its parsed manifest.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

impl Dataset {
    /// Opens a dataset given its directory or its manifest file.
    pub fn open(path: &Path) -> Result<Self> {
        let manifest_path = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        // The version is checked before the rest is interpreted.
        let table: toml::Table = toml::from_str(&text).map_err(|e| Error::format(&manifest_path, e.to_string()))?;
        let version = table
            .get("version")
            .and_then(toml::Value::as_integer)
            .ok_or_else(|| Error::format(&manifest_path, "missing integer `version`"))?;
        if version != MANIFEST_VERSION as i64 {
            return Err(Error::Version {
                path: manifest_path,
                found: u32::try_from(version).unwrap_or(u32::MAX),
                expected: MANIFEST_VERSION,
            });
        }
        let manifest: Manifest = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::format(&manifest_path, e.to_string()))?;
        manifest.check(&manifest_path)?;
        let dir = manifest_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(Self { dir, manifest })
    }

    /// Creates an empty dataset directory (the manifest is written by
    /// [`Dataset::write_manifest`]).
    pub fn create(dir: &Path, dt: f64, embedding_dim: usize) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest: Manifest::new(dt, embedding_dim),
        })
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.dir.join(MANIFEST_FILE)
    }

    pub fn path_of(&self, relative: &str) -> PathBuf {
        self.dir.join(relative)
    }

    pub fn write_manifest(&self) -> Result<()> {
        let path = self.manifest_path();
        self.manifest.check(&path)?;
        let text = toml::to_string(&self.manifest).map_err(|e| Error::format(&path, e.to_string()))?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn len(&self) -> usize {
        self.manifest.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.frames.is_empty()
    }

    pub fn ego_poses(&self) -> Result<Vec<Pose>> {
        self.manifest
            .frames
            .iter()
            .map(|f| Pose::from_row_major(&f.ego_pose))
            .collect()
    }

    pub fn calibrations(&self) -> Result<Vec<PinholeCalibration>> {
        self.manifest.cameras.iter().map(CameraEntry::calibration).collect()
    }

    /// Appends a frame, writing its arrays next to the manifest. Points and
    /// flow are stored in the world frame.
    pub fn save_frame(&mut self, frame: &Frame, feature_maps: &[FeatureMap]) -> Result<()> {
        if self.manifest.coordinate_frame != CoordinateFrame::World {
            return Err(Error::Pipeline("frames can only be appended to world-frame datasets".into()));
        }
        let index = self.manifest.frames.len();
        if frame.index != index {
            return Err(Error::InvalidParameter(format!(
                "frame index {} appended at position {index}",
                frame.index
            )));
        }
        let stem = format!("frame_{index:06}");
        let points = format!("{stem}.points.f32");
        write_f32_file(&self.path_of(&points), &points_to_f32(&frame.points))?;
        let embeddings = match &frame.embeddings {
            Some(e) => {
                if e.dim() != self.manifest.embedding_dim || e.len() != frame.len() {
                    return Err(Error::DimensionMismatch {
                        expected: self.manifest.embedding_dim,
                        got: e.dim(),
                    });
                }
                let name = format!("{stem}.embeddings.f32");
                write_f32_file(&self.path_of(&name), e.as_slice())?;
                Some(name)
            }
            None => None,
        };
        let flow = match &frame.flow {
            Some(f) => Some(self.write_flow_file(index, f)?),
            None => None,
        };
        if !feature_maps.is_empty() && feature_maps.len() != self.manifest.cameras.len() {
            return Err(Error::LengthMismatch {
                what: "feature maps vs cameras",
                left: feature_maps.len(),
                right: self.manifest.cameras.len(),
            });
        }
        let mut maps = Vec::new();
        for (c, map) in feature_maps.iter().enumerate() {
            let cam = &self.manifest.cameras[c];
            if map.width != cam.width || map.height != cam.height || map.dim != self.manifest.embedding_dim {
                return Err(Error::InvalidParameter(format!(
                    "feature map {c} of frame {index} does not match its camera or the embedding dim"
                )));
            }
            let name = format!("{stem}.camera{c}.f32");
            write_f32_file(&self.path_of(&name), &map.data)?;
            maps.push(name);
        }
        self.manifest.frames.push(FrameEntry {
            index,
            timestamp: frame.timestamp,
            ego_pose: frame.ego_pose.to_row_major().to_vec(),
            num_points: frame.len(),
            points,
            embeddings,
            flow,
            feature_maps: maps,
        });
        self.manifest.frame_count = self.manifest.frames.len();
        Ok(())
    }

    /// Writes a flow file for frame `index` and returns its name; the
    /// manifest entry is not touched.
    fn write_flow_file(&self, index: usize, flow: &FlowField) -> Result<String> {
        let name = format!("frame_{index:06}.flow.f32");
        write_f32_file(&self.path_of(&name), &vectors_to_f32(&flow.vectors))?;
        Ok(name)
    }

    /// Stores world-frame flow for every frame and references it in the
    /// manifest (call [`Dataset::write_manifest`] afterwards).
    pub fn set_flow(&mut self, flows: &[FlowField]) -> Result<()> {
        if flows.len() != self.len() {
            return Err(Error::LengthMismatch {
                what: "flow fields vs frames",
                left: flows.len(),
                right: self.len(),
            });
        }
        let world = self.manifest.coordinate_frame == CoordinateFrame::World;
        let poses = self.ego_poses()?;
        for (i, flow) in flows.iter().enumerate() {
            if flow.len() != self.manifest.frames[i].num_points {
                return Err(Error::LengthMismatch {
                    what: "flow vectors vs points",
                    left: flow.len(),
                    right: self.manifest.frames[i].num_points,
                });
            }
            let stored = if world {
                flow.clone()
            } else {
                let inv = poses[i].inverse();
                let v = flow.vectors.iter().map(|v| inv.rotate_vector(v)).collect();
                FlowField::from_vectors(v, flow.dt)?
            };
            let name = self.write_flow_file(i, &stored)?;
            self.manifest.frames[i].flow = Some(name);
        }
        Ok(())
    }

    /// Loads frame `index` with world-frame points. Features come from the
    /// embeddings file when present, otherwise from the camera feature maps.
    pub fn load_frame(&self, index: usize) -> Result<Frame> {
        let entry = self
            .manifest
            .frames
            .get(index)
            .ok_or_else(|| Error::Pipeline(format!("frame {index} out of range ({} frames)", self.len())))?;
        let n = entry.num_points;
        let ego_pose = Pose::from_row_major(&entry.ego_pose)?;
        let raw = read_f32_file(&self.path_of(&entry.points), n * 3)?;
        let mut points: Vec<Point3> = f32_to_triples(&raw).into_iter().map(Point3::from).collect();
        let sensor = self.manifest.coordinate_frame == CoordinateFrame::Sensor;
        let sensor_points = if sensor {
            let s = points.clone();
            points = s.iter().map(|p| ego_pose.transform_point(p)).collect();
            Some(s)
        } else {
            None
        };
        let dim = self.manifest.embedding_dim;
        let embeddings = match (&entry.embeddings, entry.feature_maps.is_empty()) {
            (Some(name), _) => Some(EmbeddingSet::new(dim, read_f32_file(&self.path_of(name), n * dim)?)?),
            (None, false) => {
                let views = entry
                    .feature_maps
                    .iter()
                    .zip(&self.manifest.cameras)
                    .map(|(name, cam)| {
                        let data = read_f32_file(&self.path_of(name), cam.height * cam.width * dim)?;
                        Ok(CameraView {
                            calibration: cam.calibration()?,
                            features: FeatureMap::new(cam.height, cam.width, dim, data)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let local = match &sensor_points {
                    Some(s) => s.clone(),
                    None => {
                        let inv = ego_pose.inverse();
                        points.iter().map(|p| inv.transform_point(p)).collect()
                    }
                };
                Some(unproject_pixel_features(&local, &views)?.0)
            }
            (None, true) => None,
        };
        let flow = match &entry.flow {
            Some(name) => {
                let mut v = f32_to_triples(&read_f32_file(&self.path_of(name), n * 3)?);
                if sensor {
                    for x in &mut v {
                        *x = ego_pose.rotate_vector(x);
                    }
                }
                Some(FlowField::from_vectors(v, self.manifest.dt)?)
            }
            None => None,
        };
        Ok(Frame {
            index,
            timestamp: entry.timestamp,
            ego_pose,
            points,
            embeddings,
            flow,
        })
    }

    /// All frames, loaded in parallel.
    pub fn load_frames(&self) -> Result<Vec<Frame>> {
        (0..self.len()).into_par_iter().map(|i| self.load_frame(i)).collect()
    }
}
