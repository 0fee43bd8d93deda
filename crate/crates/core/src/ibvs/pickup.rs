use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::{control_law, control_law_masked, robot_effort, ActuatorLimits, FeatureError, IbvsError, RobotEffort, TwistMode, ACTUATED};
use crate::vision::{depth_from_size, CameraModel, TagObservation};
use crate::{micros_from_secs, secs, Micros};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Navigate,
    HeightAdjust,
    Grasp,
    Done,
    Aborted,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Done | Phase::Aborted)
    }

    fn rank(self) -> u8 {
        match self {
            Phase::Navigate => 0,
            Phase::HeightAdjust => 1,
            Phase::Grasp => 2,
            Phase::Done | Phase::Aborted => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    /// The grasp script ran but the tag was outside the grasp envelope.
    GraspFailed,
    TagLost,
    NonFiniteCommand,
    GraspTimeout,
}

impl Outcome {
    pub fn is_success(self) -> bool {
        self == Outcome::Success
    }
}

/// Which depth feeds the interaction matrix.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthMode {
    /// Measured from the apparent tag size at every update.
    #[default]
    Measured,
    /// The constant desired depth.
    Desired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PickupConfig {
    /// Servo gain, 1/s.
    pub lambda: f64,
    /// Gain on the depth error `Z - Z*`, 1/s. Kept below `1 / (4 tau)` for
    /// the robot's velocity lag `tau` so the approach does not overshoot.
    pub depth_gain: f64,
    pub twist: TwistMode,
    /// Apparent tag side at the grasp standoff, px.
    pub target_size_px: f64,
    pub center_tolerance_px: f64,
    pub size_tolerance_px: f64,
    pub hold_s: f64,
    /// Keep sending the last command this long after losing the tag.
    pub lost_hold_s: f64,
    pub lost_abort_s: f64,
    pub grasp_timeout_s: f64,
    /// Physical tag side, m.
    pub tag_side: f64,
    pub depth_mode: DepthMode,
    pub limits: ActuatorLimits,
}

impl Default for PickupConfig {
    fn default() -> Self {
        Self {
            lambda: 0.8,
            depth_gain: 0.25,
            twist: TwistMode::default(),
            target_size_px: 100.0,
            center_tolerance_px: 5.0,
            size_tolerance_px: 3.0,
            hold_s: 0.6,
            lost_hold_s: 2.0,
            lost_abort_s: 10.0,
            grasp_timeout_s: 15.0,
            tag_side: 0.1,
            depth_mode: DepthMode::Measured,
            limits: ActuatorLimits::default(),
        }
    }
}

impl PickupConfig {
    pub fn validate(&self) -> Result<(), IbvsError> {
        if !(self.lambda > 0.0) {
            return Err(IbvsError::InvalidGain(self.lambda));
        }
        if !(self.depth_gain.is_finite() && self.depth_gain >= 0.0) {
            return Err(IbvsError::InvalidConfig(format!("depth_gain must be >= 0, got {}", self.depth_gain)));
        }
        let positive = [
            ("target_size_px", self.target_size_px),
            ("tag_side", self.tag_side),
            ("center_tolerance_px", self.center_tolerance_px),
            ("size_tolerance_px", self.size_tolerance_px),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(IbvsError::InvalidConfig(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.lost_hold_s >= 0.0 && self.lost_abort_s >= self.lost_hold_s) {
            return Err(IbvsError::InvalidConfig("need 0 <= lost_hold_s <= lost_abort_s".into()));
        }
        Ok(())
    }

    /// Depth at which the tag shows `target_size_px`.
    pub fn desired_depth(&self, camera: &CameraModel) -> f64 {
        camera.focal_px * self.tag_side / self.target_size_px
    }
}

/// Grasp-related bits of edge telemetry.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GraspStatus {
    pub script_active: bool,
    pub script_done: bool,
    pub grasping: bool,
}

/// One line of the phase log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseRecord {
    /// Seconds.
    pub t: f64,
    pub phase: Phase,
    pub e_norm: f64,
    #[serde(rename = "Z")]
    pub z: f64,
}

/// What the cloud should send this tick.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PickupOutput {
    /// `None` means send nothing and let the edge heartbeat expire.
    pub effort: Option<RobotEffort>,
    pub grasp: bool,
}

/// Automatic box pickup: drive up to the tag, match its height, grasp.
///
/// Driven by three inputs: observations as they arrive, edge telemetry, and
/// a periodic [`PickupMachine::poll`] that yields the command to publish.
#[derive(Debug, Clone)]
pub struct PickupMachine {
    config: PickupConfig,
    camera: CameraModel,
    phase: Phase,
    outcome: Option<Outcome>,
    effort: Option<RobotEffort>,
    hold_since: Option<Micros>,
    last_visible: Micros,
    grasp_started: Micros,
    grasp_acked: bool,
    last_error: Option<FeatureError>,
}

impl PickupMachine {
    /// `camera` is the controller's nominal camera model, which need not match
    /// the real one.
    pub fn new(config: PickupConfig, camera: CameraModel, now: Micros) -> Result<Self, IbvsError> {
        config.validate()?;
        Ok(Self {
            config,
            camera,
            phase: Phase::Navigate,
            outcome: None,
            effort: None,
            hold_since: None,
            last_visible: now,
            grasp_started: 0,
            grasp_acked: false,
            last_error: None,
        })
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.outcome
    }

    pub fn config(&self) -> &PickupConfig {
        &self.config
    }

    pub fn last_error(&self) -> Option<&FeatureError> {
        self.last_error.as_ref()
    }

    fn transition(&mut self, next: Phase, now: Micros) {
        debug_assert!(next.rank() >= self.phase.rank() && !self.phase.is_terminal());
        tracing::debug!(from = ?self.phase, to = ?next, t = secs(now), "pickup phase");
        self.phase = next;
        self.hold_since = None;
        if next == Phase::Grasp {
            self.grasp_started = now;
            self.grasp_acked = false;
        }
        if next.is_terminal() {
            self.effort = None;
        }
    }

    fn finish(&mut self, outcome: Outcome, now: Micros) {
        let phase = if matches!(outcome, Outcome::Success | Outcome::GraspFailed) { Phase::Done } else { Phase::Aborted };
        self.outcome = Some(outcome);
        self.transition(phase, now);
    }

    /// True once `cond` has held continuously for the configured time.
    fn held(&mut self, cond: bool, t: Micros) -> bool {
        if !cond {
            self.hold_since = None;
            return false;
        }
        let since = *self.hold_since.get_or_insert(t);
        t - since >= micros_from_secs(self.config.hold_s)
    }

    /// Consumes one recognition result. Returns a phase-log line for
    /// visible observations processed in a servo phase.
    pub fn on_observation(&mut self, obs: &TagObservation, now: Micros) -> Option<PhaseRecord> {
        if !matches!(self.phase, Phase::Navigate | Phase::HeightAdjust) {
            return None;
        }
        if !obs.visible {
            self.hold_since = None;
            return None;
        }
        self.last_visible = now;
        let measured = depth_from_size(obs, &self.camera, self.config.tag_side).ok()?;
        let z_star = self.config.desired_depth(&self.camera);
        let depth = match self.config.depth_mode {
            DepthMode::Measured => measured,
            DepthMode::Desired => z_star,
        };
        let (x, y) = self.camera.to_normalized(obs.center[0], obs.center[1]);
        let s = Vector2::new(x, y);
        let error = match self.phase {
            Phase::Navigate => FeatureError::horizontal(s, Vector2::zeros(), depth),
            _ => FeatureError::new(s, Vector2::zeros(), depth),
        };
        self.last_error = Some(error);

        let law = match self.config.twist {
            TwistMode::Full => control_law(&error, self.config.lambda),
            TwistMode::Actuated => control_law_masked(&error, self.config.lambda, ACTUATED),
        };
        match law {
            Ok(twist) => {
                let mut effort = robot_effort(&twist.robot, &self.config.limits);
                if self.phase == Phase::Navigate {
                    effort.height_rate = 0.0;
                }
                effort.forward += self.config.depth_gain * (measured - z_star);
                let effort = effort.clamped(&self.config.limits);
                if !effort.is_finite() {
                    self.finish(Outcome::NonFiniteCommand, now);
                } else {
                    self.effort = Some(effort);
                }
            }
            Err(IbvsError::NonFinite) => self.finish(Outcome::NonFiniteCommand, now),
            // Degenerate geometry: keep the previous command.
            Err(_) => {}
        }

        let record = PhaseRecord { t: secs(now), phase: self.phase, e_norm: error.e.norm(), z: measured };
        let (cx, cy) = self.camera.principal_point();
        let centred_x = (obs.center[0] - cx).abs() < self.config.center_tolerance_px;
        let centred_y = (obs.center[1] - cy).abs() < self.config.center_tolerance_px;
        let sized = (obs.side_px - self.config.target_size_px).abs() < self.config.size_tolerance_px;
        let phase = self.phase;
        match phase {
            Phase::Navigate if self.held(centred_x && sized, obs.timestamp) => {
                self.transition(Phase::HeightAdjust, now)
            }
            Phase::HeightAdjust if self.held(centred_y, obs.timestamp) => {
                self.effort = Some(RobotEffort::default());
                self.transition(Phase::Grasp, now)
            }
            _ => {}
        }
        Some(record)
    }

    pub fn on_telemetry(&mut self, status: GraspStatus, now: Micros) {
        if self.phase != Phase::Grasp {
            return;
        }
        if status.script_active || status.script_done {
            self.grasp_acked = true;
        }
        if status.script_done {
            let outcome = if status.grasping { Outcome::Success } else { Outcome::GraspFailed };
            self.finish(outcome, now);
        }
    }

    /// Command to publish at `now`.
    pub fn poll(&mut self, now: Micros) -> PickupOutput {
        match self.phase {
            Phase::Navigate | Phase::HeightAdjust => {
                let lost = now.saturating_sub(self.last_visible);
                if lost > micros_from_secs(self.config.lost_abort_s) {
                    self.finish(Outcome::TagLost, now);
                    return PickupOutput::default();
                }
                if lost > micros_from_secs(self.config.lost_hold_s) {
                    return PickupOutput::default();
                }
                PickupOutput { effort: self.effort, grasp: false }
            }
            Phase::Grasp => {
                if now - self.grasp_started > micros_from_secs(self.config.grasp_timeout_s) {
                    self.finish(Outcome::GraspTimeout, now);
                    return PickupOutput::default();
                }
                if self.grasp_acked {
                    PickupOutput::default()
                } else {
                    PickupOutput { effort: Some(RobotEffort::default()), grasp: true }
                }
            }
            Phase::Done | Phase::Aborted => PickupOutput::default(),
        }
    }
}
