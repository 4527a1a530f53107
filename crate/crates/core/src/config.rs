//! Pipeline configuration, read from and written to a commented TOML file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{FlowParams, GroundParams};
use crate::geometry::IouKind;
use crate::proposals::{ClusterParams, ProposalParams};
use crate::semantics::vocab::{default_query_sets, BACKGROUND_CATEGORIES};
use crate::tracking::{AmodalParams, CleanupParams, RegistrationInit, RegistrationParams, TrackerParams};

/// The shipped default configuration.
pub const DEFAULT_CONFIG_TOML: &str = include_str!("../config/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySet {
    pub category: String,
    pub prompts: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IouMode {
    Bev,
    #[serde(rename = "3d")]
    ThreeD,
}

impl From<IouMode> for IouKind {
    fn from(m: IouMode) -> Self {
        match m {
            IouMode::Bev => IouKind::Bev,
            IouMode::ThreeD => IouKind::ThreeD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    Flow,
    Kalman,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub eps_sf: f64,
    pub eps_bg: f64,
    pub r_bg: f64,
    pub background_filter: bool,
    pub dbscan_eps: f64,
    pub min_pts: usize,
    pub alpha: f64,
    pub beta: f64,
    pub min_cluster_points: usize,
    pub moving_threshold: f64,
    pub ground_clearance: f64,
    pub flow_cluster_radius: f64,
    pub association_gate: f64,
    pub max_misses: usize,
    pub min_track_length: usize,
    pub registration_init: InitMode,
    pub registration_trim: f64,
    pub ground_snap: f64,
    pub nms_iou: f64,
    pub nms_mode: IouMode,
    pub min_dim: f64,
    pub max_diag: f64,
    pub region_length: f64,
    pub region_width: f64,
    pub iou_thresholds: Vec<f64>,
    pub mot_iou: f64,
    pub fp_min_overlap: f64,
    pub pca_enabled: bool,
    pub pca_k: usize,
    pub background_categories: Vec<String>,
    pub query_sets: Vec<QuerySet>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            eps_sf: 1.0,
            eps_bg: 0.02,
            r_bg: 0.99,
            background_filter: true,
            dbscan_eps: 1.0,
            min_pts: 5,
            alpha: 0.5,
            beta: 0.0,
            min_cluster_points: 5,
            moving_threshold: 1.0,
            ground_clearance: 0.3,
            flow_cluster_radius: 1.0,
            association_gate: 3.0,
            max_misses: 2,
            min_track_length: 3,
            registration_init: InitMode::Flow,
            registration_trim: 0.2,
            ground_snap: 0.6,
            nms_iou: 0.5,
            nms_mode: IouMode::Bev,
            min_dim: 0.05,
            max_diag: 20.0,
            region_length: 100.0,
            region_width: 40.0,
            iou_thresholds: vec![0.4, 0.5],
            mot_iou: 0.5,
            fp_min_overlap: 0.1,
            pca_enabled: false,
            pca_k: 64,
            background_categories: BACKGROUND_CATEGORIES.iter().map(|s| s.to_string()).collect(),
            query_sets: default_query_sets()
                .into_iter()
                .map(|(category, prompts)| QuerySet { category, prompts })
                .collect(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Applies a `key=value` override, where `value` is a TOML literal.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::InvalidParameter(format!("override `{assignment}` is not key=value")))?;
        let mut table: toml::Table = toml::from_str(&self.to_toml()).expect("config round-trips");
        let key = key.trim();
        if !table.contains_key(key) {
            return Err(Error::InvalidParameter(format!("unknown config key `{key}`")));
        }
        let parsed: toml::Table = toml::from_str(&format!("v = {}", value.trim()))
            .map_err(|e| Error::InvalidParameter(format!("override `{key}`: {e}")))?;
        table.insert(key.to_string(), parsed["v"].clone());
        let cfg: Self = table
            .try_into()
            .map_err(|e| Error::InvalidParameter(format!("override `{key}`: {e}")))?;
        cfg.validate()?;
        *self = cfg;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let checks: [(&str, bool); 20] = [
            ("eps_sf >= 0", self.eps_sf >= 0.0),
            ("eps_bg in [-1, 1]", (-1.0..=1.0).contains(&self.eps_bg)),
            ("r_bg in (0, 1]", self.r_bg > 0.0 && self.r_bg <= 1.0),
            ("dbscan_eps > 0", self.dbscan_eps > 0.0),
            ("min_pts >= 1", self.min_pts >= 1),
            ("alpha, beta >= 0", self.alpha >= 0.0 && self.beta >= 0.0),
            ("moving_threshold >= 0", self.moving_threshold >= 0.0),
            ("ground_clearance >= 0", self.ground_clearance >= 0.0),
            ("flow_cluster_radius > 0", self.flow_cluster_radius > 0.0),
            ("association_gate > 0", self.association_gate > 0.0),
            ("min_track_length >= 1", self.min_track_length >= 1),
            ("registration_trim in [0, 1)", (0.0..1.0).contains(&self.registration_trim)),
            ("ground_snap >= 0", self.ground_snap >= 0.0),
            ("nms_iou in (0, 1]", self.nms_iou > 0.0 && self.nms_iou <= 1.0),
            ("min_dim >= 0 and max_diag > 0", self.min_dim >= 0.0 && self.max_diag > 0.0),
            ("region dims > 0", self.region_length > 0.0 && self.region_width > 0.0),
            (
                "iou_thresholds in (0, 1]",
                !self.iou_thresholds.is_empty() && self.iou_thresholds.iter().all(|t| *t > 0.0 && *t <= 1.0),
            ),
            ("mot_iou in (0, 1]", self.mot_iou > 0.0 && self.mot_iou <= 1.0),
            ("pca_k >= 1", self.pca_k >= 1),
            ("query_sets non-empty", !self.query_sets.is_empty()),
        ];
        for (what, ok) in checks {
            if !ok {
                return Err(Error::InvalidParameter(format!("config: {what}")));
            }
        }
        Ok(())
    }

    pub fn ground_params(&self) -> GroundParams {
        GroundParams {
            clearance: self.ground_clearance,
            ..GroundParams::default()
        }
    }

    pub fn flow_params(&self) -> FlowParams {
        FlowParams {
            cluster_radius: self.flow_cluster_radius,
            ..FlowParams::default()
        }
    }

    pub fn cluster_params(&self) -> ClusterParams {
        ClusterParams {
            eps: self.dbscan_eps,
            min_pts: self.min_pts,
            flow_weight: self.alpha,
            embedding_weight: self.beta,
        }
    }

    pub fn proposal_params(&self) -> ProposalParams {
        ProposalParams {
            r_bg: self.r_bg,
            min_points: self.min_cluster_points,
            max_diag: self.max_diag,
            moving_threshold: self.moving_threshold,
            ..ProposalParams::default()
        }
    }

    pub fn tracker_params(&self, dt: f64) -> TrackerParams {
        TrackerParams {
            max_association_dist: self.association_gate,
            max_misses: self.max_misses,
            dt,
            ..TrackerParams::default()
        }
    }

    pub fn registration_params(&self, dt: f64) -> RegistrationParams {
        let mut p = RegistrationParams {
            init: match self.registration_init {
                InitMode::Flow => RegistrationInit::Flow,
                InitMode::Kalman => RegistrationInit::Kalman,
            },
            dt,
            ..RegistrationParams::default()
        };
        p.icp.trim_fraction = self.registration_trim;
        p
    }

    pub fn amodal_params(&self) -> AmodalParams {
        AmodalParams {
            moving_threshold: self.moving_threshold,
            ground_snap: (self.ground_snap > 0.0).then_some(self.ground_snap),
            ..AmodalParams::default()
        }
    }

    pub fn cleanup_params(&self) -> CleanupParams {
        CleanupParams {
            min_dim: self.min_dim,
            max_diag: self.max_diag,
            nms_iou: self.nms_iou,
            iou_kind: self.nms_mode.into(),
        }
    }
}
