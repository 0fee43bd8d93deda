//! The physical side of a run: the robot, the tagged box and the scripted
//! grasp. The edge node owns one [`World`] and steps it at the control rate.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Dynamics, DynamicsError, DynamicsParams, RobotState, Vec2};
use crate::vision::{BodyPose, CameraModel, CameraPose, RecognitionService, TagObservation, TagTarget, Vec3, VisionError};
use crate::{micros_from_secs, secs, Micros};

#[derive(Debug, thiserror::Error)]
pub enum WorldError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Vision(#[from] VisionError),
    #[error("invalid target: {0}")]
    Target(String),
}

/// Waypoint path followed by a person carrying the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CarrierPath {
    /// Ground positions after the start position, m.
    pub waypoints: Vec<[f64; 2]>,
    pub speed: f64,
    /// Time the carrier starts walking, s.
    pub start_s: f64,
}

impl Default for CarrierPath {
    fn default() -> Self {
        Self { waypoints: Vec::new(), speed: 0.2, start_s: 0.0 }
    }
}

/// The box is pulled away after the grasp starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Yank {
    pub after_grasp_s: f64,
    pub offset: [f64; 3],
}

impl Default for Yank {
    fn default() -> Self {
        Self { after_grasp_s: 0.5, offset: [0.0, 0.3, 0.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetConfig {
    /// Ground position of the tag centre at t = 0, m.
    pub position: [f64; 2],
    /// Height of the tag centre, m.
    pub height: f64,
    /// World yaw of the tag normal, degrees.
    pub facing_deg: f64,
    pub side: f64,
    /// `None` for a box resting on a table.
    pub carrier: Option<CarrierPath>,
    pub yank: Option<Yank>,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self { position: [0.0, 0.0], height: 0.75, facing_deg: 180.0, side: 0.1, carrier: None, yank: None }
    }
}

impl TargetConfig {
    pub fn validate(&self) -> Result<(), WorldError> {
        if !(self.side > 0.0) {
            return Err(WorldError::Target(format!("side must be > 0, got {}", self.side)));
        }
        if let Some(c) = &self.carrier {
            if !(c.speed > 0.0) {
                return Err(WorldError::Target("carrier speed must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Where the box is over time.
#[derive(Debug, Clone)]
pub struct TargetTrack {
    config: TargetConfig,
    yanked_at: Option<Micros>,
}

impl TargetTrack {
    pub fn new(config: TargetConfig) -> Result<Self, WorldError> {
        config.validate()?;
        Ok(Self { config, yanked_at: None })
    }

    pub fn config(&self) -> &TargetConfig {
        &self.config
    }

    /// Arms the yank relative to the grasp start.
    fn on_grasp_start(&mut self, now: Micros) {
        if let Some(y) = &self.config.yank {
            self.yanked_at = Some(now + micros_from_secs(y.after_grasp_s));
        }
    }

    fn ground_position(&self, t: Micros) -> Vec2 {
        let start = Vec2::new(self.config.position[0], self.config.position[1]);
        let Some(path) = &self.config.carrier else {
            return start;
        };
        let mut travel = path.speed * (secs(t) - path.start_s).max(0.0);
        let mut at = start;
        for w in &path.waypoints {
            let next = Vec2::new(w[0], w[1]);
            let leg = (next - at).norm();
            if travel <= leg {
                return at + (next - at) * (travel / leg.max(1e-12));
            }
            travel -= leg;
            at = next;
        }
        at
    }

    pub fn at(&self, t: Micros) -> TagTarget {
        let g = self.ground_position(t);
        let mut center = Vec3::new(g.x, g.y, self.config.height);
        if let (Some(y), Some(when)) = (&self.config.yank, self.yanked_at) {
            if t >= when {
                center += Vec3::new(y.offset[0], y.offset[1], y.offset[2]);
            }
        }
        TagTarget::facing(center, self.config.facing_deg.to_radians(), self.config.side)
    }
}

/// Scripted dual-arm grasp and the success envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraspConfig {
    pub reach_s: f64,
    pub hold_s: f64,
    pub lift_s: f64,
    /// Arm CoM displacement at full reach, (forward, up), m.
    pub reach: [f64; 2],
    pub lift: f64,
    /// Distance of the nominal grasp point along the optical axis, m.
    pub gripper_distance: f64,
    /// Gain of the loop that holds the grasp point in place while the arms
    /// move, 1/s.
    pub hold_gain: f64,
    /// Damping on the grasp-point velocity, s.
    pub hold_damping: f64,
    pub tolerance_m: f64,
    pub yaw_tolerance_deg: f64,
}

impl Default for GraspConfig {
    fn default() -> Self {
        Self {
            reach_s: 1.0,
            hold_s: 1.0,
            lift_s: 1.0,
            reach: [0.15, 0.05],
            lift: 0.05,
            gripper_distance: 0.5,
            hold_gain: 3.0,
            hold_damping: 1.0,
            tolerance_m: 0.05,
            yaw_tolerance_deg: 25.0,
        }
    }
}

impl GraspConfig {
    pub fn duration(&self) -> Micros {
        micros_from_secs(self.reach_s + self.hold_s + self.lift_s)
    }

    /// Arm CoM offset from rest, `(forward, up)`, at `t` seconds into the script.
    pub fn arm_offset(&self, t: f64) -> Vec2 {
        let ramp = |x: f64, len: f64| if len > 0.0 { (x / len).clamp(0.0, 1.0) } else { 1.0 };
        let r = ramp(t, self.reach_s);
        let l = ramp(t - self.reach_s - self.hold_s, self.lift_s);
        Vec2::new(self.reach[0] * r, self.reach[1] * r + self.lift * l)
    }
}

/// Tag position relative to the nominal grasp point, robot-heading frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeCheck {
    pub forward: f64,
    pub lateral: f64,
    pub vertical: f64,
    /// Yaw between the robot heading and the reversed tag normal, degrees.
    pub yaw_deg: f64,
    pub inside: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScriptState {
    Idle,
    /// `anchor` is the grasp point when the script started.
    Running { started: Micros, anchor: Vec3, last_offset: Vec3 },
    Finished { success: bool },
}

/// Drive inputs for one control period.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DriveCommand {
    pub forward: f64,
    pub yaw_rate: f64,
    pub height_rate: f64,
}

#[derive(Debug, Clone)]
pub struct World {
    dynamics: Dynamics,
    state: RobotState,
    height_target: f64,
    target: TargetTrack,
    grasp: GraspConfig,
    script: ScriptState,
    last_check: Option<EnvelopeCheck>,
    recognition: RecognitionService,
}

impl World {
    pub fn new(
        params: DynamicsParams,
        camera: CameraModel,
        recognition_hz: f64,
        target: TargetConfig,
        grasp: GraspConfig,
        start: (Vec2, f64, f64),
        seed: u64,
    ) -> Result<Self, WorldError> {
        let dynamics = Dynamics::new(params)?;
        let (pos, heading, height) = start;
        let state = dynamics.initial_state(pos, heading, height);
        Ok(Self {
            height_target: state.body_height,
            state,
            dynamics,
            target: TargetTrack::new(target)?,
            grasp,
            script: ScriptState::Idle,
            last_check: None,
            recognition: RecognitionService::new(camera, recognition_hz, seed)?,
        })
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut RobotState {
        &mut self.state
    }

    pub fn script(&self) -> ScriptState {
        self.script
    }

    pub fn envelope(&self) -> Option<EnvelopeCheck> {
        self.last_check
    }

    pub fn target_at(&self, t: Micros) -> TagTarget {
        self.target.at(t)
    }

    pub fn camera(&self) -> &CameraModel {
        self.recognition.camera()
    }

    pub fn camera_pose(&self) -> CameraPose {
        self.recognition.camera().pose(&BodyPose::of(&self.dynamics, &self.state))
    }

    /// Takes a camera frame if one is due.
    pub fn capture(&mut self, now: Micros) -> Option<TagObservation> {
        let pose = self.camera_pose();
        let target = self.target.at(now);
        self.recognition.capture(now, &pose, &target)
    }

    /// Starts the grasp script. Ignored while one is running or done.
    pub fn start_grasp(&mut self, now: Micros) -> bool {
        if self.script != ScriptState::Idle || self.state.fallen {
            return false;
        }
        let anchor = self.gripper_point();
        self.script = ScriptState::Running { started: now, anchor, last_offset: Vec3::zeros() };
        self.target.on_grasp_start(now);
        true
    }

    /// Nominal grasp point in the world frame.
    pub fn gripper_point(&self) -> Vec3 {
        let pose = self.camera_pose();
        pose.position + pose.optical_axis() * self.grasp.gripper_distance
    }

    pub fn check_envelope(&self, t: Micros) -> EnvelopeCheck {
        let tag = self.target.at(t);
        let d = tag.center - self.gripper_point();
        let (s, c) = self.state.heading.sin_cos();
        let forward = d.x * c + d.y * s;
        let lateral = -d.x * s + d.y * c;
        let vertical = d.z;
        let facing = (-tag.normal.y).atan2(-tag.normal.x);
        let yaw = wrap_angle(facing - self.state.heading).to_degrees();
        let tol = self.grasp.tolerance_m;
        let inside = forward.abs() <= tol
            && lateral.abs() <= tol
            && vertical.abs() <= tol
            && yaw.abs() <= self.grasp.yaw_tolerance_deg;
        EnvelopeCheck { forward, lateral, vertical, yaw_deg: yaw, inside }
    }

    /// Advances one control period ending at `now`.
    ///
    /// While the grasp script runs, the drive command is replaced by a loop
    /// that keeps the grasp point where it was at the start: the arms shift
    /// the CoM, and the balance controller alone would roll the robot and
    /// tilt the torso to compensate.
    pub fn step(&mut self, now: Micros, mut cmd: DriveCommand) {
        let p = self.dynamics.params().clone();
        let dt = p.dt;
        if let ScriptState::Running { started, anchor, last_offset } = self.script {
            let d = self.gripper_point() - anchor;
            let rate = (d - last_offset) / dt;
            self.script = ScriptState::Running { started, anchor, last_offset: d };
            let (s, c) = self.state.heading.sin_cos();
            let (k, kd) = (self.grasp.hold_gain, self.grasp.hold_damping);
            let along = |v: Vec3| v.x * c + v.y * s;
            cmd = DriveCommand {
                forward: (-k * along(d) - kd * along(rate)).clamp(-0.2, 0.2),
                yaw_rate: 0.0,
                height_rate: (-k * d.z - kd * rate.z).clamp(-0.1, 0.1),
            };
        }
        self.height_target = (self.height_target + cmd.height_rate * dt).clamp(p.height_min, p.height_max);
        self.state = self.dynamics.set_height(&self.state, self.height_target);

        if let ScriptState::Running { started, .. } = self.script {
            let t = secs(now.saturating_sub(started));
            let base = p.arm_rest_com(self.dynamics.hip_height(self.state.limbs.leg_knee_angle));
            let arm = base + self.grasp.arm_offset(t);
            self.state = self.dynamics.set_arms(&self.state, [arm, arm]);
            if now - started >= self.grasp.duration() {
                let check = self.check_envelope(now);
                self.last_check = Some(check);
                self.script = ScriptState::Finished { success: check.inside };
                if check.inside {
                    self.state = self.dynamics.set_carrying(&self.state, true, arm);
                }
                tracing::debug!(?check, "grasp script finished");
            }
        }

        let wheel = self.dynamics.wheel_command(&self.state, cmd.forward, cmd.yaw_rate);
        self.state = self.dynamics.step(&self.state, wheel, dt);
    }
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let r = a.rem_euclid(tau);
    if r > std::f64::consts::PI {
        r - tau
    } else {
        r
    }
}
