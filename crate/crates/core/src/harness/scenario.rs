//! Scenario files.

use std::path::Path;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::dynamics::DynamicsParams;
use crate::heartbeat::HeartbeatConfig;
use crate::ibvs::PickupConfig;
use crate::nodes::live::LivePorts;
use crate::nodes::{LinkSet, TeleopSegment};
use crate::vision::CameraModel;
use crate::world::{GraspConfig, TargetConfig};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Auto,
    TeleopScripted,
    TeleopThenAuto,
}

/// Where the robot starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Placement {
    Pose {
        x: f64,
        y: f64,
        #[serde(default)]
        heading_deg: f64,
        #[serde(default = "default_height")]
        height: f64,
    },
    /// `distance` metres out from the tag, at a random bearing of up to
    /// `max_bearing_deg` off the tag normal, looking at the tag.
    FacingTarget {
        #[serde(default = "default_distance")]
        distance: f64,
        #[serde(default)]
        max_bearing_deg: f64,
        #[serde(default = "default_height")]
        height: f64,
    },
}

fn default_height() -> f64 {
    0.55
}

fn default_distance() -> f64 {
    2.0
}

impl Default for Placement {
    fn default() -> Self {
        Placement::FacingTarget { distance: default_distance(), max_bearing_deg: 0.0, height: default_height() }
    }
}

impl Placement {
    /// Ground position, heading and body height for one repetition.
    pub fn resolve(&self, target: &TargetConfig, seed: u64) -> (Vector2<f64>, f64, f64) {
        match *self {
            Placement::Pose { x, y, heading_deg, height } => (Vector2::new(x, y), heading_deg.to_radians(), height),
            Placement::FacingTarget { distance, max_bearing_deg, height } => {
                let bearing = if max_bearing_deg > 0.0 {
                    ChaCha8Rng::seed_from_u64(seed).random_range(-max_bearing_deg..=max_bearing_deg)
                } else {
                    0.0
                };
                let out = (target.facing_deg + bearing).to_radians();
                let tag = Vector2::from(target.position);
                let pos = tag + distance * Vector2::new(out.cos(), out.sin());
                (pos, out + std::f64::consts::PI, height)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Rates {
    /// Camera frames per second processed by recognition.
    pub recognition_hz: f64,
    /// Servo command stream from the cloud.
    pub publish_hz: f64,
    /// Repeat rate of held operator input.
    pub teleop_hz: f64,
    /// Edge ticks between telemetry records.
    pub telemetry_every: u32,
}

impl Default for Rates {
    fn default() -> Self {
        Self { recognition_hz: 5.0, publish_hz: 20.0, teleop_hz: 20.0, telemetry_every: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub duration_s: f64,
    pub repetitions: u32,
    pub mode: Mode,
    pub placement: Placement,
    pub target: TargetConfig,
    pub teleop: Vec<TeleopSegment>,
    /// When auto pickup is engaged (auto and teleop_then_auto modes).
    pub auto_at_s: f64,
    /// Stop this long after the pickup finishes; `null` runs the full duration.
    pub settle_s: Option<f64>,
    pub link: LinkSet,
    pub heartbeat: HeartbeatConfig,
    pub dynamics: DynamicsParams,
    /// The real camera.
    pub camera: CameraModel,
    /// The controller's camera model, if it differs from the real one.
    pub controller_camera: Option<CameraModel>,
    pub ibvs: PickupConfig,
    pub grasp: GraspConfig,
    pub rates: Rates,
    /// Node sockets for live runs.
    pub live_ports: LivePorts,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            seed: 0,
            duration_s: 60.0,
            repetitions: 1,
            mode: Mode::Auto,
            placement: Placement::default(),
            target: TargetConfig::default(),
            teleop: Vec::new(),
            auto_at_s: 0.0,
            settle_s: Some(2.0),
            link: LinkSet::default(),
            heartbeat: HeartbeatConfig::default(),
            dynamics: DynamicsParams::default(),
            camera: CameraModel::default(),
            controller_camera: None,
            ibvs: PickupConfig::default(),
            grasp: GraspConfig::default(),
            rates: Rates::default(),
            live_ports: LivePorts::default(),
        }
    }
}

fn config_error(e: serde_path_to_error::Error<serde_json::Error>) -> HarnessError {
    let path = e.path().to_string();
    HarnessError::Config { path, message: e.into_inner().to_string() }
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Self, HarnessError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let s: Scenario = serde_path_to_error::deserialize(de).map_err(config_error)?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self, HarnessError> {
        let s: Scenario = serde_path_to_error::deserialize(value).map_err(config_error)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |path: &str, message: String| Err(HarnessError::Config { path: path.into(), message });
        if !(self.duration_s.is_finite() && self.duration_s >= 0.0) {
            return bad("duration_s", format!("must be >= 0, got {}", self.duration_s));
        }
        if !(self.auto_at_s.is_finite() && self.auto_at_s >= 0.0) {
            return bad("auto_at_s", format!("must be >= 0, got {}", self.auto_at_s));
        }
        if let Some(s) = self.settle_s {
            if !(s.is_finite() && s >= 0.0) {
                return bad("settle_s", format!("must be >= 0, got {s}"));
            }
        }
        for (name, p) in [("link.cloud_edge", &self.link.cloud_edge), ("link.rcu_edge", &self.link.rcu_edge)] {
            if let Err(e) = p.validate() {
                return bad(name, e.to_string());
            }
        }
        if let Err(e) = self.heartbeat.shape() {
            return bad("heartbeat", e.to_string());
        }
        if !(self.heartbeat.window_ms.is_finite() && self.heartbeat.window_ms > 0.0) {
            return bad("heartbeat.window_ms", "must be > 0".into());
        }
        if let Err(e) = self.dynamics.validate() {
            return bad("dynamics", e.to_string());
        }
        if let Err(e) = self.camera.validate() {
            return bad("camera", e);
        }
        if let Some(c) = &self.controller_camera {
            if let Err(e) = c.validate() {
                return bad("controller_camera", e);
            }
        }
        if let Err(e) = self.ibvs.validate() {
            return bad("ibvs", e.to_string());
        }
        if let Err(e) = self.target.validate() {
            return bad("target", e.to_string());
        }
        let r = &self.rates;
        if !(1.0..=10.0).contains(&r.recognition_hz) {
            return bad("rates.recognition_hz", format!("must be in [1, 10], got {}", r.recognition_hz));
        }
        for (name, hz) in [("rates.publish_hz", r.publish_hz), ("rates.teleop_hz", r.teleop_hz)] {
            if !(hz > 0.0 && hz <= 1000.0) {
                return bad(name, format!("must be in (0, 1000], got {hz}"));
            }
        }
        for (i, seg) in self.teleop.iter().enumerate() {
            let ok = seg.start_s.is_finite() && seg.start_s >= 0.0 && seg.duration_s.is_finite() && seg.duration_s >= 0.0;
            if !ok {
                return bad(&format!("teleop[{i}]"), "start_s and duration_s must be >= 0".into());
            }
            if let Err(e) = seg.command.validate() {
                return bad(&format!("teleop[{i}].command"), e);
            }
        }
        Ok(())
    }
}
