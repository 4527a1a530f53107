use super::EmbeddingSet;
use crate::error::{Error, Result};
use crate::geometry::{Point3, Pose};

/// Pinhole intrinsics plus the sensor-to-camera extrinsic.
///
/// Camera frame convention: +z forward, +x right, +y down. Pixel centers sit
/// at integer `(u, v)`; `u` indexes columns.
#[derive(Debug, Clone, PartialEq)]
pub struct PinholeCalibration {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub sensor_to_camera: Pose,
}

impl PinholeCalibration {
    /// Camera looking along sensor +x (image x right, y down), principal
    /// point at the image center.
    pub fn forward_facing(width: usize, height: usize, focal: f64) -> Self {
        let r = nalgebra::Matrix3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0);
        Self {
            fx: focal,
            fy: focal,
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
            width,
            height,
            sensor_to_camera: Pose::new(r, crate::geometry::Vector3::zeros()).expect("rotation is orthonormal"),
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy]
            .iter()
            .chain(self.sensor_to_camera.to_row_major().iter())
            .all(|v| v.is_finite());
        if !finite || self.fx == 0.0 || self.fy == 0.0 {
            return Err(Error::InvalidParameter(
                "camera calibration must be finite with non-zero focal lengths".into(),
            ));
        }
        Ok(())
    }

    /// Nearest pixel `(column, row)` of a sensor-frame point, if it lands in
    /// front of the camera and inside the image.
    pub fn project(&self, p: &Point3) -> Option<(usize, usize)> {
        let c = self.sensor_to_camera.transform_point(p);
        if c.z <= 1e-9 {
            return None;
        }
        let u = (self.fx * c.x / c.z + self.cx).round();
        let v = (self.fy * c.y / c.z + self.cy).round();
        if u < 0.0 || v < 0.0 || u >= self.width as f64 || v >= self.height as f64 {
            return None;
        }
        Some((u as usize, v as usize))
    }
}

/// `H × W × D` per-pixel features, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub height: usize,
    pub width: usize,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width * dim {
            return Err(Error::LengthMismatch {
                what: "feature map values vs H*W*D",
                left: data.len(),
                right: height * width * dim,
            });
        }
        Ok(Self {
            height,
            width,
            dim,
            data,
        })
    }

    pub fn pixel(&self, col: usize, row: usize) -> &[f32] {
        let start = (row * self.width + col) * self.dim;
        &self.data[start..start + self.dim]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraView {
    pub calibration: PinholeCalibration,
    pub features: FeatureMap,
}

/// Gathers per-point features from camera feature maps.
///
/// Cameras are tried in slice order; the first one that sees a point wins.
/// Points no camera sees get a zero row and `false` in the visibility mask.
pub fn unproject_pixel_features(
    points_sensor: &[Point3],
    cameras: &[CameraView],
) -> Result<(EmbeddingSet, Vec<bool>)> {
    let dim = match cameras.first() {
        Some(c) => c.features.dim,
        None => return Err(Error::InvalidParameter("no camera views supplied".into())),
    };
    for cam in cameras {
        cam.calibration.validate()?;
        if cam.features.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: cam.features.dim,
            });
        }
        if cam.features.width != cam.calibration.width
            || cam.features.height != cam.calibration.height
        {
            return Err(Error::InvalidParameter(
                "feature map size differs from calibration image size".into(),
            ));
        }
    }
    let mut emb = EmbeddingSet::zeros(points_sensor.len(), dim);
    let mut visible = vec![false; points_sensor.len()];
    for (i, p) in points_sensor.iter().enumerate() {
        for cam in cameras {
            if let Some((col, row)) = cam.calibration.project(p) {
                emb.row_mut(i).copy_from_slice(cam.features.pixel(col, row));
                visible[i] = true;
                break;
            }
        }
    }
    Ok((emb, visible))
}
