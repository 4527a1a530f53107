//! Deterministic synthetic scenes with full ground truth.
//!
//! Randomness comes from ChaCha8 seeded with the caller's seed, so a
//! `(spec, seed)` pair produces the same dataset on every platform.

mod presets;

pub use presets::{occlusion_scenario, preset, PRESET_NAMES};

use std::f64::consts::PI;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::geometry::{Box7, Point3, Pose, Vector3};
use crate::semantics::vocab::{default_query_sets, BACKGROUND_CATEGORIES};
use crate::semantics::{EmbeddingSet, FeatureMap, PinholeCalibration, TextQuery};

/// Planar constant-twist motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trajectory {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    /// Speed along the heading (m/s).
    pub speed: f64,
    /// rad/s.
    pub yaw_rate: f64,
}

impl Trajectory {
    pub fn stationary(x: f64, y: f64, heading: f64) -> Self {
        Self::straight(x, y, heading, 0.0)
    }

    pub fn straight(x: f64, y: f64, heading: f64, speed: f64) -> Self {
        Self {
            x,
            y,
            heading,
            speed,
            yaw_rate: 0.0,
        }
    }

    /// `(x, y, heading)` at time `t`.
    pub fn state_at(&self, t: f64) -> (f64, f64, f64) {
        let h = self.heading + self.yaw_rate * t;
        if self.yaw_rate == 0.0 {
            (
                self.x + self.speed * t * self.heading.cos(),
                self.y + self.speed * t * self.heading.sin(),
                h,
            )
        } else {
            let r = self.speed / self.yaw_rate;
            (
                self.x + r * (h.sin() - self.heading.sin()),
                self.y + r * (self.heading.cos() - h.cos()),
                h,
            )
        }
    }

    pub fn velocity_at(&self, t: f64) -> Vector3 {
        let h = self.heading + self.yaw_rate * t;
        Vector3::new(self.speed * h.cos(), self.speed * h.sin(), 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    /// Index into [`SceneSpec::categories`].
    pub category: usize,
    /// `(length, width, height)` in m.
    pub dims: [f64; 3],
    pub trajectory: Trajectory,
    /// Surface points per m².
    pub density: f64,
    /// Frames in which the object yields no points.
    pub hidden_frames: Option<Range<usize>>,
}

impl ObjectSpec {
    pub fn box_at(&self, t: f64) -> Box7 {
        let (x, y, h) = self.trajectory.state_at(t);
        let [l, w, ht] = self.dims;
        Box7 {
            cx: x,
            cy: y,
            cz: 0.5 * ht,
            length: l,
            width: w,
            height: ht,
            heading: crate::geometry::normalize_angle(h),
        }
    }

    fn hidden(&self, frame: usize) -> bool {
        self.hidden_frames.as_ref().is_some_and(|r| r.contains(&frame))
    }
}

/// A static box-shaped background element.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundElement {
    pub shape: Box7,
    /// Index into [`SceneSpec::background_categories`].
    pub tag: usize,
    pub density: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingModel {
    pub dim: usize,
    /// Every point embedding sits exactly this far (degrees) from its prototype.
    pub noise_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorModel {
    pub range: f64,
    pub dropout: f64,
    pub noise_sigma: f64,
    /// Sensor height above the ground (m).
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundSpec {
    pub density: f64,
    pub tag: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub frames: usize,
    pub dt: f64,
    pub ego: Trajectory,
    pub objects: Vec<ObjectSpec>,
    pub background: Vec<BackgroundElement>,
    pub ground: GroundSpec,
    pub embedding: EmbeddingModel,
    pub sensor: SensorModel,
    /// Object categories as `(name, prompts)`.
    pub categories: Vec<(String, Vec<String>)>,
    pub background_categories: Vec<String>,
    /// Renders one forward camera feature map per frame when set.
    pub camera: Option<PinholeCalibration>,
}

impl SceneSpec {
    /// Ego, sensor and vocabulary defaults with no objects or background.
    pub fn base(frames: usize) -> Self {
        Self {
            frames,
            dt: 0.1,
            ego: Trajectory::stationary(0.0, 0.0, 0.0),
            objects: Vec::new(),
            background: Vec::new(),
            ground: GroundSpec {
                density: 0.3,
                tag: background_index("road"),
            },
            embedding: EmbeddingModel {
                dim: 16,
                noise_deg: 10.0,
            },
            sensor: SensorModel {
                range: 40.0,
                dropout: 0.0,
                noise_sigma: 0.0,
                height: 1.8,
            },
            categories: default_query_sets(),
            background_categories: BACKGROUND_CATEGORIES.iter().map(|s| s.to_string()).collect(),
            camera: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("scene spec: {m}")));
        if self.frames == 0 {
            return bad("at least one frame required");
        }
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        for o in &self.objects {
            if o.dims.iter().any(|d| !(*d > 0.0)) || !(o.density >= 0.0) {
                return bad("object dims must be positive and density non-negative");
            }
            if o.category >= self.categories.len() {
                return bad("object category out of range");
            }
        }
        for b in &self.background {
            b.shape.validate()?;
            if b.tag >= self.background_categories.len() || !(b.density >= 0.0) {
                return bad("background element tag out of range or negative density");
            }
        }
        if self.ground.tag >= self.background_categories.len() || !(self.ground.density >= 0.0) {
            return bad("ground tag out of range or negative density");
        }
        let s = &self.sensor;
        if !(s.range > 0.0) || !(0.0..1.0).contains(&s.dropout) || !(s.noise_sigma >= 0.0) {
            return bad("sensor range must be positive, dropout in [0, 1), noise >= 0");
        }
        if !(self.embedding.noise_deg >= 0.0) {
            return bad("embedding noise must be non-negative");
        }
        Prototypes::new(self.embedding.dim, self.background_categories.len(), self.categories.len())?;
        Ok(())
    }

    pub fn ego_pose(&self, frame: usize) -> Pose {
        let (x, y, h) = self.ego.state_at(frame as f64 * self.dt);
        Pose::from_yaw(h, Vector3::new(x, y, self.sensor.height))
    }
}

pub fn background_index(name: &str) -> usize {
    BACKGROUND_CATEGORIES
        .iter()
        .position(|c| *c == name)
        .expect("known background category")
}

/// Unit prototypes: background `j` is `(e0 + e_{1+j})/√2`, object `k` is
/// `(−e0 + e_{1+B+k})/√2`. Objects and background meet at cosine −½,
/// distinct objects at ½.
#[derive(Debug, Clone, PartialEq)]
pub struct Prototypes {
    pub dim: usize,
    pub background: Vec<Vec<f32>>,
    pub objects: Vec<Vec<f32>>,
}

impl Prototypes {
    pub fn new(dim: usize, n_background: usize, n_objects: usize) -> Result<Self> {
        let need = 1 + n_background + n_objects;
        if dim < need {
            return Err(Error::InvalidParameter(format!(
                "embedding dim {dim} too small for {n_background} background and {n_objects} object prototypes (need {need})"
            )));
        }
        let s = std::f32::consts::FRAC_1_SQRT_2;
        let make = |sign: f32, axis: usize| {
            let mut v = vec![0.0f32; dim];
            v[0] = sign * s;
            v[axis] = s;
            v
        };
        Ok(Self {
            dim,
            background: (0..n_background).map(|j| make(1.0, 1 + j)).collect(),
            objects: (0..n_objects).map(|k| make(-1.0, 1 + n_background + k)).collect(),
        })
    }
}

/// What produced a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PointSource {
    Ground,
    Background(usize),
    Object(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtBox {
    pub frame: usize,
    pub track_id: usize,
    pub category: usize,
    pub bbox: Box7,
    pub num_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub dt: f64,
    /// World-frame points with per-point embeddings.
    pub frames: Vec<Frame>,
    pub sources: Vec<Vec<PointSource>>,
    pub gt_flow: Vec<Vec<Vector3>>,
    /// One box per object per frame in which it has at least one point.
    pub gt_boxes: Vec<GtBox>,
    pub categories: Vec<String>,
    pub queries: Vec<TextQuery>,
    pub background_queries: Vec<TextQuery>,
    pub camera: Option<PinholeCalibration>,
    pub feature_maps: Option<Vec<FeatureMap>>,
}

impl SynthDataset {
    /// Indices of the points of `object` in `frame`.
    pub fn object_points(&self, frame: usize, object: usize) -> Vec<usize> {
        self.sources[frame]
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == PointSource::Object(object))
            .map(|(i, _)| i)
            .collect()
    }

    /// Object category of each point, `None` for ground and background.
    pub fn point_categories(&self, frame: usize, spec_objects: &[ObjectSpec]) -> Vec<Option<usize>> {
        self.sources[frame]
            .iter()
            .map(|s| match s {
                PointSource::Object(o) => Some(spec_objects[*o].category),
                _ => None,
            })
            .collect()
    }
}

/// Face of a box in its local frame: outward normal and center.
fn faces(b: &Box7) -> [(Vector3, Vector3, [f64; 2]); 5] {
    let (l, w, h) = (0.5 * b.length, 0.5 * b.width, 0.5 * b.height);
    // (normal, center, [extent along u, extent along v]) with u, v spanning the face.
    [
        (Vector3::x(), Vector3::new(l, 0.0, 0.0), [b.width, b.height]),
        (-Vector3::x(), Vector3::new(-l, 0.0, 0.0), [b.width, b.height]),
        (Vector3::y(), Vector3::new(0.0, w, 0.0), [b.length, b.height]),
        (-Vector3::y(), Vector3::new(0.0, -w, 0.0), [b.length, b.height]),
        (Vector3::z(), Vector3::new(0.0, 0.0, h), [b.length, b.width]),
    ]
}

fn face_point(normal: &Vector3, center: &Vector3, u: f64, v: f64) -> Vector3 {
    if normal.x != 0.0 {
        center + Vector3::new(0.0, u, v)
    } else if normal.y != 0.0 {
        center + Vector3::new(u, 0.0, v)
    } else {
        center + Vector3::new(u, v, 0.0)
    }
}

/// Does the open segment `from → to` pass through box `b`?
fn segment_hits_box(b: &Box7, from: &Point3, to: &Point3) -> bool {
    let a = b.to_local(from);
    let d = b.to_local(to) - a;
    let half = [0.5 * b.length, 0.5 * b.width, 0.5 * b.height];
    let (mut t0, mut t1): (f64, f64) = (0.0, 1.0 - 1e-6);
    for k in 0..3 {
        if d[k].abs() < 1e-12 {
            if a[k].abs() > half[k] {
                return false;
            }
            continue;
        }
        let (mut ta, mut tb) = ((-half[k] - a[k]) / d[k], (half[k] - a[k]) / d[k]);
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return false;
        }
    }
    true
}

fn stochastic_count(rng: &mut ChaCha8Rng, expected: f64) -> usize {
    let base = expected.floor();
    base as usize + usize::from(rng.random::<f64>() < expected - base)
}

/// Rotates `proto` by exactly `angle` towards a random orthogonal direction.
fn noisy_embedding(rng: &mut ChaCha8Rng, proto: &[f32], angle: f64) -> Vec<f32> {
    if angle == 0.0 {
        return proto.to_vec();
    }
    let p: Vec<f64> = proto.iter().map(|&v| v as f64).collect();
    loop {
        let mut u: Vec<f64> = (0..p.len()).map(|_| rng.sample(StandardNormal)).collect();
        let along: f64 = u.iter().zip(&p).map(|(a, b)| a * b).sum();
        for (ui, pi) in u.iter_mut().zip(&p) {
            *ui -= along * pi;
        }
        let n = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n < 1e-9 {
            continue;
        }
        let (c, s) = (angle.cos(), angle.sin());
        return p.iter().zip(&u).map(|(pi, ui)| (c * pi + s * ui / n) as f32).collect();
    }
}

struct Sample {
    point: Point3,
    source: PointSource,
    flow: Vector3,
}

/// Samples visible surface points of `b`. Faces must face the sensor and
/// the sensor ray must not cross any box in `occluders` other than `own`.
#[allow(clippy::too_many_arguments)]
fn sample_box_surface(
    rng: &mut ChaCha8Rng,
    b: &Box7,
    density: f64,
    sensor: &Point3,
    occluders: &[Box7],
    own: Option<usize>,
    range: f64,
    mut emit: impl FnMut(Point3),
) {
    let pose = b.pose();
    for (normal, center, [eu, ev]) in faces(b) {
        let n_world = pose.rotate_vector(&normal);
        let c_world = pose.transform_point(&Point3::from(center));
        if n_world.dot(&(sensor - c_world)) <= 0.0 {
            continue;
        }
        let count = stochastic_count(rng, density * eu * ev);
        for _ in 0..count {
            let u = rng.random_range(-0.5..0.5) * eu;
            let v = rng.random_range(-0.5..0.5) * ev;
            let p = pose.transform_point(&Point3::from(face_point(&normal, &center, u, v)));
            if (p - sensor).norm() > range {
                continue;
            }
            let blocked = occluders
                .iter()
                .enumerate()
                .any(|(k, o)| Some(k) != own && segment_hits_box(o, sensor, &p));
            if !blocked {
                emit(p);
            }
        }
    }
}

pub fn generate(spec: &SceneSpec, seed: u64) -> Result<SynthDataset> {
    spec.validate()?;
    let protos = Prototypes::new(spec.embedding.dim, spec.background_categories.len(), spec.categories.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = spec.embedding.noise_deg.to_radians();

    let mut frames = Vec::with_capacity(spec.frames);
    let mut all_sources = Vec::with_capacity(spec.frames);
    let mut all_flow = Vec::with_capacity(spec.frames);
    let mut gt_boxes = Vec::new();
    let mut feature_maps = spec.camera.as_ref().map(|_| Vec::with_capacity(spec.frames));

    for f in 0..spec.frames {
        let t = f as f64 * spec.dt;
        let ego_pose = spec.ego_pose(f);
        let sensor = Point3::from(*ego_pose.translation());

        let present: Vec<usize> = (0..spec.objects.len()).filter(|&o| !spec.objects[o].hidden(f)).collect();
        let object_boxes: Vec<Box7> = present.iter().map(|&o| spec.objects[o].box_at(t)).collect();
        let mut occluders = object_boxes.clone();
        occluders.extend(spec.background.iter().map(|b| b.shape));

        let mut samples: Vec<Sample> = Vec::new();
        for (k, &o) in present.iter().enumerate() {
            let obj = &spec.objects[o];
            let b = object_boxes[k];
            let v = obj.trajectory.velocity_at(t);
            let w = Vector3::new(0.0, 0.0, obj.trajectory.yaw_rate);
            sample_box_surface(&mut rng, &b, obj.density, &sensor, &occluders, Some(k), spec.sensor.range, |p| {
                samples.push(Sample {
                    point: p,
                    source: PointSource::Object(o),
                    flow: v + w.cross(&(p - b.center())),
                })
            });
        }
        for (j, elem) in spec.background.iter().enumerate() {
            let own = Some(object_boxes.len() + j);
            sample_box_surface(&mut rng, &elem.shape, elem.density, &sensor, &occluders, own, spec.sensor.range, |p| {
                samples.push(Sample {
                    point: p,
                    source: PointSource::Background(j),
                    flow: Vector3::zeros(),
                })
            });
        }
        let disk = PI * spec.sensor.range * spec.sensor.range;
        let n_ground = stochastic_count(&mut rng, spec.ground.density * disk);
        for _ in 0..n_ground {
            let r = spec.sensor.range * rng.random::<f64>().sqrt();
            let a = rng.random_range(-PI..PI);
            let p = Point3::new(sensor.x + r * a.cos(), sensor.y + r * a.sin(), 0.0);
            let footprint = occluders.iter().any(|b| {
                let q = b.to_local(&p);
                q.x.abs() <= 0.5 * b.length && q.y.abs() <= 0.5 * b.width
            });
            if footprint || (p - sensor).norm() > spec.sensor.range {
                continue;
            }
            if occluders.iter().any(|b| segment_hits_box(b, &sensor, &p)) {
                continue;
            }
            samples.push(Sample {
                point: p,
                source: PointSource::Ground,
                flow: Vector3::zeros(),
            });
        }

        // Sensor effects.
        let mut points = Vec::with_capacity(samples.len());
        let mut sources = Vec::with_capacity(samples.len());
        let mut flow = Vec::with_capacity(samples.len());
        let mut emb_rows: Vec<f32> = Vec::with_capacity(samples.len() * spec.embedding.dim);
        for s in samples {
            if spec.sensor.dropout > 0.0 && rng.random::<f64>() < spec.sensor.dropout {
                continue;
            }
            let mut p = s.point;
            if spec.sensor.noise_sigma > 0.0 {
                for c in 0..3 {
                    p[c] += spec.sensor.noise_sigma * rng.sample::<f64, _>(StandardNormal);
                }
                if let PointSource::Object(o) = s.source {
                    let k = present.iter().position(|&q| q == o).expect("present object");
                    p = clamp_into(&object_boxes[k], &p);
                }
            }
            let proto = match s.source {
                PointSource::Ground => &protos.background[spec.ground.tag],
                PointSource::Background(j) => &protos.background[spec.background[j].tag],
                PointSource::Object(o) => &protos.objects[spec.objects[o].category],
            };
            emb_rows.extend(noisy_embedding(&mut rng, proto, noise));
            points.push(p);
            sources.push(s.source);
            flow.push(s.flow);
        }

        for (k, &o) in present.iter().enumerate() {
            let num_points = sources.iter().filter(|s| **s == PointSource::Object(o)).count();
            if num_points > 0 {
                gt_boxes.push(GtBox {
                    frame: f,
                    track_id: o,
                    category: spec.objects[o].category,
                    bbox: object_boxes[k],
                    num_points,
                });
            }
        }

        let embeddings = EmbeddingSet::new(spec.embedding.dim, emb_rows)?;
        if let (Some(maps), Some(cal)) = (feature_maps.as_mut(), spec.camera.as_ref()) {
            let inv = ego_pose.inverse();
            let sensor_pts: Vec<Point3> = points.iter().map(|p| inv.transform_point(p)).collect();
            maps.push(render_feature_map(&sensor_pts, &embeddings, cal));
        }
        let mut frame = Frame::new(f, t, ego_pose, points);
        frame.embeddings = Some(embeddings);
        frames.push(frame);
        all_sources.push(sources);
        all_flow.push(flow);
    }

    let queries = spec
        .categories
        .iter()
        .zip(&protos.objects)
        .map(|((name, prompts), p)| TextQuery::new(name.clone(), prompts.clone(), vec![p.clone(); prompts.len()]))
        .collect::<Result<Vec<_>>>()?;
    let background_queries = spec
        .background_categories
        .iter()
        .zip(&protos.background)
        .map(|(name, p)| TextQuery::new(name.clone(), vec![name.clone()], vec![p.clone()]))
        .collect::<Result<Vec<_>>>()?;

    Ok(SynthDataset {
        dt: spec.dt,
        frames,
        sources: all_sources,
        gt_flow: all_flow,
        gt_boxes,
        categories: spec.categories.iter().map(|(n, _)| n.clone()).collect(),
        queries,
        background_queries,
        camera: spec.camera.clone(),
        feature_maps,
    })
}

fn clamp_into(b: &Box7, p: &Point3) -> Point3 {
    let q = b.to_local(p);
    let local = Point3::new(
        q.x.clamp(-0.5 * b.length, 0.5 * b.length),
        q.y.clamp(-0.5 * b.width, 0.5 * b.width),
        q.z.clamp(-0.5 * b.height, 0.5 * b.height),
    );
    b.pose().transform_point(&local)
}

/// Z-buffered splat of per-point embeddings into a camera image; pixels
/// without a point stay zero.
pub fn render_feature_map(sensor_points: &[Point3], emb: &EmbeddingSet, cal: &PinholeCalibration) -> FeatureMap {
    let dim = emb.dim();
    let mut depth = vec![f64::INFINITY; cal.width * cal.height];
    let mut data = vec![0.0f32; cal.width * cal.height * dim];
    for (i, p) in sensor_points.iter().enumerate() {
        let Some((u, v)) = cal.project(p) else { continue };
        let z = cal.sensor_to_camera.transform_point(p).z;
        let px = v * cal.width + u;
        if z < depth[px] {
            depth[px] = z;
            data[px * dim..(px + 1) * dim].copy_from_slice(emb.row(i));
        }
    }
    FeatureMap {
        height: cal.height,
        width: cal.width,
        dim,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::cosine_similarity;

    fn one_box(speed: f64, yaw_rate: f64) -> SceneSpec {
        let mut spec = SceneSpec::base(5);
        spec.objects.push(ObjectSpec {
            category: 0,
            dims: [4.0, 2.0, 1.5],
            trajectory: Trajectory {
                yaw_rate,
                ..Trajectory::straight(10.0, 3.0, 0.3, speed)
            },
            density: 20.0,
            hidden_frames: None,
        });
        spec.embedding.noise_deg = 0.0;
        spec
    }

    #[test]
    fn empty_scene_is_all_background() {
        let ds = generate(&SceneSpec::base(2), 1).unwrap();
        assert!(ds.gt_boxes.is_empty());
        assert!(ds.sources.iter().flatten().all(|s| *s == PointSource::Ground));
        assert!(ds.frames[0].len() > 100);
    }

    #[test]
    fn zero_frames_rejected() {
        assert!(generate(&SceneSpec::base(0), 1).is_err());
    }

    #[test]
    fn static_box_points_inside_and_zero_flow() {
        let spec = one_box(0.0, 0.0);
        let ds = generate(&spec, 2).unwrap();
        for f in 0..5 {
            let b = spec.objects[0].box_at(f as f64 * spec.dt);
            let idx = ds.object_points(f, 0);
            assert!(!idx.is_empty());
            for i in idx {
                assert!(b.contains(&ds.frames[f].points[i]));
                assert_eq!(ds.gt_flow[f][i], Vector3::zeros());
            }
        }
    }

    #[test]
    fn constant_velocity_flow_is_exact() {
        let spec = one_box(5.0, 0.0);
        let ds = generate(&spec, 3).unwrap();
        let v = spec.objects[0].trajectory.velocity_at(0.0);
        for i in ds.object_points(2, 0) {
            assert_eq!(ds.gt_flow[2][i], v);
        }
    }

    #[test]
    fn turning_flow_is_rigid_velocity() {
        let spec = one_box(5.0, 0.5);
        let ds = generate(&spec, 4).unwrap();
        let (t, dt) = (0.2, 1e-6);
        let b0 = spec.objects[0].box_at(t);
        let b1 = spec.objects[0].box_at(t + dt);
        for i in ds.object_points(2, 0) {
            let p = ds.frames[2].points[i];
            let moved = b1.pose().transform_point(&Point3::from(b0.to_local(&p)));
            let fd = (moved - p) / dt;
            assert!((fd - ds.gt_flow[2][i]).norm() < 1e-4);
        }
    }

    #[test]
    fn same_seed_same_dataset() {
        let spec = one_box(5.0, 0.1);
        assert_eq!(generate(&spec, 9).unwrap(), generate(&spec, 9).unwrap());
        assert_ne!(generate(&spec, 9).unwrap().frames[0].points, generate(&spec, 10).unwrap().frames[0].points);
    }

    #[test]
    fn prototypes_geometry() {
        let p = Prototypes::new(16, 11, 2).unwrap();
        let c = cosine_similarity(&p.objects[0], &p.background[3]).unwrap();
        assert!((c + 0.5).abs() < 1e-6);
        let c = cosine_similarity(&p.objects[0], &p.objects[1]).unwrap();
        assert!((c - 0.5).abs() < 1e-6);
        assert!(Prototypes::new(13, 11, 2).is_err());
    }

    #[test]
    fn noise_angle_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = Prototypes::new(16, 11, 2).unwrap();
        for _ in 0..100 {
            let e = noisy_embedding(&mut rng, &p.objects[1], 10f64.to_radians());
            let c = cosine_similarity(&e, &p.objects[1]).unwrap();
            assert!((c.acos().to_degrees() - 10.0).abs() < 1e-3);
        }
    }

    #[test]
    fn occluded_points_are_hidden() {
        // A wall between the sensor and the box hides it entirely.
        let mut spec = one_box(0.0, 0.0);
        spec.objects[0].trajectory = Trajectory::stationary(10.0, 0.0, 0.0);
        spec.background.push(BackgroundElement {
            shape: Box7::new(Point3::new(6.0, 0.0, 2.0), 0.2, 10.0, 4.0, 0.0).unwrap(),
            tag: background_index("wall"),
            density: 1.0,
        });
        let ds = generate(&spec, 5).unwrap();
        assert!(ds.gt_boxes.is_empty());
    }

    #[test]
    fn segment_box_intersection() {
        let b = Box7::new(Point3::new(5.0, 0.0, 0.0), 1.0, 1.0, 1.0, 0.0).unwrap();
        assert!(segment_hits_box(&b, &Point3::origin(), &Point3::new(10.0, 0.0, 0.0)));
        assert!(!segment_hits_box(&b, &Point3::origin(), &Point3::new(4.0, 0.0, 0.0)));
        assert!(!segment_hits_box(&b, &Point3::origin(), &Point3::new(10.0, 5.0, 0.0)));
    }
}
