use crate::flow::FlowField;
use crate::geometry::{Point3, Pose};
use crate::semantics::EmbeddingSet;

/// One LiDAR sweep. `points` are in the world frame; `ego_pose` maps the
/// sensor frame into the world frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: usize,
    pub timestamp: f64,
    pub ego_pose: Pose,
    pub points: Vec<Point3>,
    pub embeddings: Option<EmbeddingSet>,
    pub flow: Option<FlowField>,
}

impl Frame {
    pub fn new(index: usize, timestamp: f64, ego_pose: Pose, points: Vec<Point3>) -> Self {
        Self {
            index,
            timestamp,
            ego_pose,
            points,
            embeddings: None,
            flow: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points expressed in the sensor frame.
    pub fn sensor_points(&self) -> Vec<Point3> {
        let inv = self.ego_pose.inverse();
        self.points.iter().map(|p| inv.transform_point(p)).collect()
    }

    pub fn ego_heading(&self) -> f64 {
        self.ego_pose.yaw()
    }
}
