//! Scenario configuration: JSON blocks for calibration, scene, materials,
//! teleop, filter, network, haptics and scripted leader trajectories.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::filter::KalmanConfig;
use crate::frames::{RigidTransform, Vec3, WorkspaceCalibration};
use crate::geometry::{Scene, SceneObject};
use crate::haptics::{ForceLimits, ForceModel, LawRegistry, MaterialRegistry};
use crate::metrics::Hand;
use crate::teleop::{Bounds, TeleopConfig};
use crate::transport::latency::FRAME_BUDGET_MS;
use crate::transport::{ChannelModel, WatchdogConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{path}: {reason}")]
    Invalid { path: String, reason: String },
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
}

impl ConfigError {
    pub fn invalid(path: impl Into<String>, reason: impl ToString) -> Self {
        Self::Invalid {
            path: path.into(),
            reason: reason.to_string(),
        }
    }

    /// Field path of the offending value, if any.
    pub fn path(&self) -> &str {
        match self {
            Self::Invalid { path, .. } | Self::Io { path, .. } => path,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneBlock {
    pub objects: Vec<SceneObject>,
}

/// Material registry reference: built-in presets, an external registry file
/// and inline profiles, merged in that order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialsBlock {
    #[serde(default = "yes")]
    pub presets: bool,
    /// Registry file, relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "MaterialRegistry::is_empty")]
    pub inline: MaterialRegistry,
}

fn yes() -> bool {
    true
}

impl Default for MaterialsBlock {
    fn default() -> Self {
        Self {
            presets: true,
            path: None,
            inline: MaterialRegistry::empty(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeleopBlock {
    #[serde(default = "one")]
    pub alpha: f64,
    /// Defaults to the table extent centered on the origin, z in [-100, 300].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds_mm: Option<Bounds>,
    #[serde(default = "default_max_speed")]
    pub max_speed_mm_s: f64,
}

fn one() -> f64 {
    1.0
}
fn default_max_speed() -> f64 {
    250.0
}

impl Default for TeleopBlock {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            bounds_mm: None,
            max_speed_mm_s: default_max_speed(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetBlock {
    #[serde(default)]
    pub channel: ChannelModel,
    #[serde(default = "default_t_wd")]
    pub t_wd_ms: f64,
    /// Follower clock minus leader clock, µs.
    #[serde(default)]
    pub clock_offset_us: i64,
    #[serde(default = "default_sync_period")]
    pub sync_period_ms: u64,
    #[serde(default = "default_budget")]
    pub latency_budget_ms: f64,
}

fn default_t_wd() -> f64 {
    100.0
}
fn default_sync_period() -> u64 {
    1000
}
fn default_budget() -> f64 {
    FRAME_BUDGET_MS
}

impl Default for NetBlock {
    fn default() -> Self {
        Self {
            channel: ChannelModel::default(),
            t_wd_ms: default_t_wd(),
            clock_offset_us: 0,
            sync_period_ms: default_sync_period(),
            latency_budget_ms: default_budget(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HapticsBlock {
    #[serde(default = "default_laws")]
    pub laws: Vec<String>,
    #[serde(default)]
    pub limits: ForceLimits,
}

fn default_laws() -> Vec<String> {
    ForceModel::DEFAULT_LAWS.iter().map(|s| s.to_string()).collect()
}

impl Default for HapticsBlock {
    fn default() -> Self {
        Self {
            laws: default_laws(),
            limits: ForceLimits::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub t_s: f64,
    /// Leader hand position, hand frame, mm.
    pub p_mm: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClutchEvent {
    pub t_s: f64,
    pub engaged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandTrajectory {
    pub hand: Hand,
    pub waypoints: Vec<Waypoint>,
    /// Per-axis leader tracking noise, mm (standard deviation).
    #[serde(default)]
    pub noise_mm: f64,
    /// Follower start pose, workspace mm. Defaults to the first waypoint
    /// mapped through the calibration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub follower_start_mm: Option<[f64; 3]>,
    /// Clutch changes; the clutch starts engaged.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clutch: Vec<ClutchEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    /// Anchor point for support-hand accuracy, workspace mm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_mm: Option<[f64; 3]>,
    #[serde(default)]
    pub calibration: WorkspaceCalibration,
    pub scene: SceneBlock,
    #[serde(default)]
    pub materials: MaterialsBlock,
    #[serde(default)]
    pub teleop: TeleopBlock,
    #[serde(default)]
    pub kalman: KalmanConfig,
    #[serde(default)]
    pub net: NetBlock,
    #[serde(default)]
    pub haptics: HapticsBlock,
    pub trajectories: Vec<HandTrajectory>,
}

/// Validated, ready-to-run form of a [`ScenarioConfig`].
#[derive(Debug)]
pub struct ResolvedScenario {
    pub config: ScenarioConfig,
    pub scene: Scene,
    pub materials: MaterialRegistry,
    pub model: ForceModel,
    pub teleop: TeleopConfig,
    pub watchdog: WatchdogConfig,
    pub hand_to_workspace: RigidTransform,
}

impl ScenarioConfig {
    /// Parses JSON, reporting the field path of any structural error.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::invalid(path, e.into_inner())
        })
    }

    /// Reads a scenario file. A relative material registry path is resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(rel) = &cfg.materials.path {
            let p = Path::new(rel);
            if p.is_relative() {
                let base = path.parent().map(Path::to_path_buf).unwrap_or_else(PathBuf::new);
                cfg.materials.path = Some(base.join(p).display().to_string());
            }
        }
        Ok(cfg)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canon.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn load_materials(&self) -> Result<MaterialRegistry, ConfigError> {
        let mut reg = if self.materials.presets {
            MaterialRegistry::presets()
        } else {
            MaterialRegistry::empty()
        };
        if let Some(path) = &self.materials.path {
            let text = fs::read_to_string(path).map_err(|e| ConfigError::Io {
                path: path.clone(),
                reason: e.to_string(),
            })?;
            let file = MaterialRegistry::from_json(&text).map_err(|e| ConfigError::invalid("materials.path", e))?;
            reg.extend(&file);
        }
        reg.extend(&self.materials.inline);
        for (id, m) in reg.iter() {
            m.validate()
                .map_err(|r| ConfigError::invalid(format!("materials.{id}"), r))?;
        }
        Ok(reg)
    }

    pub fn resolve(&self) -> Result<ResolvedScenario, ConfigError> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(ConfigError::invalid("duration_s", format!("must be > 0, got {}", self.duration_s)));
        }
        let hand_to_workspace = self
            .calibration
            .validate()
            .map_err(|e| ConfigError::invalid("calibration", e))?;
        let scene =
            Scene::new(self.scene.objects.clone()).map_err(|e| ConfigError::invalid("scene.objects", e))?;
        let materials = self.load_materials()?;
        for (i, obj) in self.scene.objects.iter().enumerate() {
            if !materials.contains(&obj.material) {
                return Err(ConfigError::invalid(
                    format!("scene.objects[{i}].material"),
                    format!("unknown material `{}`", obj.material),
                ));
            }
            for (j, layer) in obj.layers.iter().enumerate() {
                if !materials.contains(&layer.material) {
                    return Err(ConfigError::invalid(
                        format!("scene.objects[{i}].layers[{j}].material"),
                        format!("unknown material `{}`", layer.material),
                    ));
                }
            }
        }
        let model = LawRegistry::builtin()
            .build(&self.haptics.laws)
            .map_err(|e| ConfigError::invalid("haptics.laws", e))?;
        self.haptics
            .limits
            .validate()
            .map_err(|e| ConfigError::invalid("haptics.limits", e))?;

        let bounds = self.teleop.bounds_mm.unwrap_or_else(|| {
            let [w, d] = self.calibration.table_extent_mm;
            Bounds::new([-w / 2.0, -d / 2.0, -100.0], [w / 2.0, d / 2.0, 300.0])
        });
        let teleop = TeleopConfig::new(self.teleop.alpha, hand_to_workspace.clone(), bounds, self.teleop.max_speed_mm_s)
            .map_err(|e| ConfigError::invalid("teleop", e))?;
        self.kalman.validate().map_err(|e| ConfigError::invalid("kalman", e))?;

        self.net
            .channel
            .validate()
            .map_err(|e| ConfigError::invalid("net.channel", e))?;
        if !(self.net.t_wd_ms > 0.0 && self.net.t_wd_ms.is_finite()) {
            return Err(ConfigError::invalid("net.t_wd_ms", "must be > 0"));
        }
        let watchdog = WatchdogConfig {
            t_wd_us: (self.net.t_wd_ms * 1000.0).round() as u64,
            command_period_us: 1e6 / 90.0,
        };
        watchdog.validate().map_err(|e| ConfigError::invalid("net.t_wd_ms", e))?;
        if self.net.sync_period_ms == 0 {
            return Err(ConfigError::invalid("net.sync_period_ms", "must be > 0"));
        }
        if !(self.net.latency_budget_ms > 0.0) {
            return Err(ConfigError::invalid("net.latency_budget_ms", "must be > 0"));
        }

        self.validate_trajectories(&teleop)?;
        Ok(ResolvedScenario {
            config: self.clone(),
            scene,
            materials,
            model,
            teleop,
            watchdog,
            hand_to_workspace,
        })
    }

    fn validate_trajectories(&self, teleop: &TeleopConfig) -> Result<(), ConfigError> {
        if self.trajectories.is_empty() {
            return Err(ConfigError::invalid("trajectories", "at least one hand is required"));
        }
        for (i, tr) in self.trajectories.iter().enumerate() {
            let at = |f: &str| format!("trajectories[{i}].{f}");
            if self.trajectories[..i].iter().any(|o| o.hand == tr.hand) {
                return Err(ConfigError::invalid(at("hand"), format!("duplicate hand {}", tr.hand)));
            }
            if tr.waypoints.is_empty() {
                return Err(ConfigError::invalid(at("waypoints"), "no waypoints"));
            }
            for (j, w) in tr.waypoints.iter().enumerate() {
                if !w.t_s.is_finite() || !w.p_mm.iter().all(|v| v.is_finite()) {
                    return Err(ConfigError::invalid(at(&format!("waypoints[{j}]")), "non-finite value"));
                }
                if j > 0 && w.t_s <= tr.waypoints[j - 1].t_s {
                    return Err(ConfigError::invalid(
                        at(&format!("waypoints[{j}].t_s")),
                        "waypoint times must be strictly increasing",
                    ));
                }
            }
            if !(tr.noise_mm >= 0.0 && tr.noise_mm.is_finite()) {
                return Err(ConfigError::invalid(at("noise_mm"), "must be >= 0"));
            }
            let start = self.follower_start(tr, &teleop.hand_to_workspace);
            if !teleop.workspace_bounds.contains(&start) {
                return Err(ConfigError::invalid(at("follower_start_mm"), "outside workspace bounds"));
            }
            for (j, c) in tr.clutch.iter().enumerate() {
                if !c.t_s.is_finite() || (j > 0 && c.t_s <= tr.clutch[j - 1].t_s) {
                    return Err(ConfigError::invalid(
                        at(&format!("clutch[{j}].t_s")),
                        "clutch times must be finite and strictly increasing",
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn follower_start(&self, tr: &HandTrajectory, hand_to_workspace: &RigidTransform) -> Vec3 {
        match tr.follower_start_mm {
            Some(p) => Vec3::from(p),
            None => hand_to_workspace.transform_point(&Vec3::from(tr.waypoints[0].p_mm)),
        }
    }

    pub fn anchor(&self) -> Option<Vec3> {
        self.anchor_mm.map(Vec3::from)
    }
}
