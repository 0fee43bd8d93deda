//! Planar (sagittal) dynamics of the two-wheeled, self-balancing robot.
//!
//! The robot is modelled as an inverted pendulum on a wheel axle. The
//! pendulum runs from the wheel centre to the whole-body centre of mass,
//! which is estimated from the limb configuration. A kinematic yaw degree of
//! freedom is driven by the wheel-speed differential.
//!
//! Conventions: the body frame has its origin at the wheel centre, `x`
//! forward and `z` up along the torso. The lean angle `psi` is the signed
//! deviation of the pendulum vector from straight up (positive = leaning
//! forward). The body pitch is the rotation of the torso itself; the two
//! differ by the angle of the CoM inside the body frame.

mod balance;
mod com;
mod legs;
mod pendulum;

pub use balance::{wheel_velocity, WheelCommand};
pub use com::{estimate_com, weighted_com};
pub use pendulum::{lean_angle, PendulumGeometry};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::Micros;

pub type Vec2 = Vector2<f64>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("singular pendulum geometry (|L| = {0:e})")]
    SingularGeometry(f64),
}

/// Physical constants and controller gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsParams {
    pub gravity: f64,
    pub wheel_radius: f64,
    /// Length of each of the two leg segments (shin, thigh).
    pub leg_segment: f64,
    pub knee_min: f64,
    pub knee_max: f64,
    pub height_min: f64,
    pub height_max: f64,
    /// `|psi|` at or beyond which the robot is considered fallen.
    pub fall_angle: f64,
    /// Control and integration period (s).
    pub dt: f64,
    /// Time constant of the wheel velocity servo (s).
    pub wheel_lag: f64,
    pub max_wheel_accel: f64,
    /// Proportional coefficient between CoM velocity error and lean-rate setpoint.
    pub velocity_to_lean_rate: f64,
    /// Lean-angle term of the lean-rate setpoint (1/s).
    pub lean_gain: f64,
    /// Lean-rate tracking gain (1/s).
    pub lean_rate_gain: f64,
    /// Saturation of the wheel velocity command (m/s).
    pub max_wheel_command: f64,
    pub yaw_gain: f64,
    pub track_width: f64,
    /// Knee slew limit (rad/s).
    pub knee_slew_rate: f64,
    pub control_box_mass: f64,
    /// Control box CoM height above the hip.
    pub control_box_above_hip: f64,
    pub shoulder_above_hip: f64,
    pub arm_mass: f64,
    pub leg_mass: f64,
    pub carried_box_mass: f64,
    /// Arm CoM at rest relative to the shoulder, `[forward, up]`.
    pub arm_rest: [f64; 2],
}

impl Default for DynamicsParams {
    fn default() -> Self {
        Self {
            gravity: 9.81,
            wheel_radius: 0.08,
            leg_segment: 0.4142,
            knee_min: 0.2,
            knee_max: 1.8,
            height_min: 0.4,
            height_max: 0.9,
            fall_angle: 0.5,
            dt: 1.0 / 200.0,
            wheel_lag: 0.05,
            max_wheel_accel: 8.0,
            velocity_to_lean_rate: 0.25,
            lean_gain: 3.33,
            lean_rate_gain: 12.0,
            max_wheel_command: 2.0,
            yaw_gain: 1.5,
            track_width: 0.35,
            knee_slew_rate: 0.5,
            control_box_mass: 8.0,
            control_box_above_hip: 0.10,
            shoulder_above_hip: 0.22,
            arm_mass: 1.0,
            leg_mass: 2.0,
            carried_box_mass: 0.5,
            arm_rest: [0.05, -0.12],
        }
    }
}

impl DynamicsParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let positive = [
            ("gravity", self.gravity),
            ("wheel_radius", self.wheel_radius),
            ("leg_segment", self.leg_segment),
            ("dt", self.dt),
            ("wheel_lag", self.wheel_lag),
            ("max_wheel_accel", self.max_wheel_accel),
            ("max_wheel_command", self.max_wheel_command),
            ("track_width", self.track_width),
            ("knee_slew_rate", self.knee_slew_rate),
            ("control_box_mass", self.control_box_mass),
            ("arm_mass", self.arm_mass),
            ("leg_mass", self.leg_mass),
            ("carried_box_mass", self.carried_box_mass),
            ("fall_angle", self.fall_angle),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(DynamicsError::InvalidParameter(format!(
                    "{name} must be > 0, got {value}"
                )));
            }
        }
        if !(self.knee_min < self.knee_max) || !(self.height_min < self.height_max) {
            return Err(DynamicsError::InvalidParameter(
                "knee and height ranges must be non-empty".into(),
            ));
        }
        Ok(())
    }

    pub fn arm_rest_com(&self, hip_height: f64) -> Vec2 {
        Vec2::new(
            self.arm_rest[0],
            hip_height + self.shoulder_above_hip + self.arm_rest[1],
        )
    }

    pub fn control_box_com(&self, hip_height: f64) -> Vec2 {
        Vec2::new(0.0, hip_height + self.control_box_above_hip)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimbMasses {
    pub arms: [f64; 2],
    pub legs: [f64; 2],
    pub carried_box: f64,
}

/// Limb configuration in the body frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimbConfig {
    pub arm_com: [Vec2; 2],
    pub leg_com: [Vec2; 2],
    pub leg_knee_angle: f64,
    /// CoM of a carried box; only counted while carrying.
    pub box_com: Vec2,
    pub masses: LimbMasses,
}

impl LimbConfig {
    pub fn validate(&self, params: &DynamicsParams) -> Result<(), DynamicsError> {
        let m = &self.masses;
        let all = [m.arms[0], m.arms[1], m.legs[0], m.legs[1], m.carried_box];
        if all.iter().any(|&x| !(x > 0.0)) {
            return Err(DynamicsError::InvalidParameter(
                "limb masses must be > 0".into(),
            ));
        }
        if self.leg_knee_angle < params.knee_min - 1e-12
            || self.leg_knee_angle > params.knee_max + 1e-12
        {
            return Err(DynamicsError::InvalidParameter(format!(
                "knee angle {} outside [{}, {}]",
                self.leg_knee_angle, params.knee_min, params.knee_max
            )));
        }
        Ok(())
    }
}

/// Full robot state. Plain data: cheap to clone and send across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub time: Micros,
    /// Wheel-axle ground contact point in the world plane.
    pub ground_pos: Vec2,
    pub heading: f64,
    pub body_height: f64,
    pub lean_angle: f64,
    pub lean_rate: f64,
    /// Mean wheel angular speed (rad/s).
    pub wheel_speed: f64,
    pub yaw_rate: f64,
    pub com_velocity: f64,
    pub limbs: LimbConfig,
    pub grasping: bool,
    pub fallen: bool,
    /// Set when the last height request was outside the admissible range.
    pub height_clamped: bool,
}

/// Robot model: parameters plus the operations acting on [`RobotState`].
#[derive(Debug, Clone)]
pub struct Dynamics {
    params: DynamicsParams,
}

impl Dynamics {
    pub fn new(params: DynamicsParams) -> Result<Self, DynamicsError> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn params(&self) -> &DynamicsParams {
        &self.params
    }

    /// Upright, stationary robot at the given pose and body height.
    pub fn initial_state(&self, ground_pos: Vec2, heading: f64, body_height: f64) -> RobotState {
        let p = &self.params;
        let target = body_height.clamp(p.height_min, p.height_max);
        let knee = self.knee_for_height(target);
        let hip = self.hip_height(knee);
        let arm = p.arm_rest_com(hip);
        let leg = Vec2::new(0.0, 0.5 * hip);
        let limbs = LimbConfig {
            arm_com: [arm, arm],
            leg_com: [leg, leg],
            leg_knee_angle: knee,
            box_com: Vec2::new(0.0, hip),
            masses: LimbMasses {
                arms: [p.arm_mass; 2],
                legs: [p.leg_mass; 2],
                carried_box: p.carried_box_mass,
            },
        };
        RobotState {
            time: 0,
            ground_pos,
            heading,
            body_height: p.wheel_radius + hip,
            lean_angle: 0.0,
            lean_rate: 0.0,
            wheel_speed: 0.0,
            yaw_rate: 0.0,
            com_velocity: 0.0,
            limbs,
            grasping: false,
            fallen: false,
            height_clamped: body_height != target,
        }
    }

    /// Whole-body CoM in the body frame.
    pub fn com_body(&self, state: &RobotState) -> Vec2 {
        let hip = self.hip_height(state.limbs.leg_knee_angle);
        estimate_com(
            &state.limbs,
            self.params.control_box_mass,
            self.params.control_box_com(hip),
            state.grasping,
        )
        .expect("limb masses validated positive")
    }

    pub fn pendulum_length(&self, state: &RobotState) -> f64 {
        self.com_body(state).norm()
    }

    /// Torso pitch implied by the lean angle and the CoM offset in the body frame.
    pub fn body_pitch(&self, state: &RobotState) -> f64 {
        let c = self.com_body(state);
        state.lean_angle - c.x.atan2(c.y)
    }

    /// Pendulum geometry in the sagittal world plane `(forward, up)` with the
    /// origin at the wheel's ground contact.
    pub fn geometry(&self, state: &RobotState) -> PendulumGeometry {
        let wheel_center = Vec2::new(0.0, self.params.wheel_radius);
        let com = wheel_center + rotate_pitch(self.com_body(state), self.body_pitch(state));
        PendulumGeometry::new(com, wheel_center, Vec2::new(0.0, -1.0), self.params.wheel_radius)
    }

    /// Maps a body-frame point `(forward, up)` to the sagittal world plane.
    pub fn body_to_sagittal(&self, state: &RobotState, point: Vec2) -> Vec2 {
        Vec2::new(0.0, self.params.wheel_radius) + rotate_pitch(point, self.body_pitch(state))
    }

    /// Replaces the limb configuration, keeping the torso pitch continuous.
    pub fn with_limbs(&self, state: &RobotState, limbs: LimbConfig) -> RobotState {
        let pitch = self.body_pitch(state);
        let mut next = state.clone();
        next.limbs = limbs;
        self.rebase_lean(&mut next, pitch);
        next
    }

    /// Moves both arm CoMs (body frame), keeping the torso pitch continuous.
    pub fn set_arms(&self, state: &RobotState, arm_com: [Vec2; 2]) -> RobotState {
        let mut limbs = state.limbs.clone();
        limbs.arm_com = arm_com;
        self.with_limbs(state, limbs)
    }

    /// Starts or stops counting a carried box at `box_com`.
    pub fn set_carrying(&self, state: &RobotState, carrying: bool, box_com: Vec2) -> RobotState {
        let pitch = self.body_pitch(state);
        let mut next = state.clone();
        next.grasping = carrying;
        next.limbs.box_com = box_com;
        self.rebase_lean(&mut next, pitch);
        next
    }

    fn rebase_lean(&self, state: &mut RobotState, pitch: f64) {
        let c = self.com_body(state);
        let l = c.norm();
        state.lean_angle = pitch + c.x.atan2(c.y);
        let base = state.wheel_speed * self.params.wheel_radius;
        state.com_velocity = base + l * state.lean_rate * state.lean_angle.cos();
        if state.lean_angle.abs() >= self.params.fall_angle {
            state.fallen = true;
        }
    }
}

/// Rotates a body-frame `(forward, up)` vector by a forward pitch.
pub(crate) fn rotate_pitch(v: Vec2, pitch: f64) -> Vec2 {
    let (s, c) = pitch.sin_cos();
    Vec2::new(v.x * c + v.y * s, -v.x * s + v.y * c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_params_validate() {
        DynamicsParams::default().validate().unwrap();
        let bad = DynamicsParams { arm_mass: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn initial_state_is_upright_and_consistent() {
        let d = Dynamics::new(DynamicsParams::default()).unwrap();
        let s = d.initial_state(Vec2::zeros(), 0.0, 0.65);
        assert!((s.body_height - 0.65).abs() < 1e-12);
        let g = d.geometry(&s);
        assert!(lean_angle(&g).unwrap().abs() < 1e-12);
        s.limbs.validate(d.params()).unwrap();
    }

    #[test]
    fn moving_arms_keeps_pitch_but_shifts_lean() {
        let d = Dynamics::new(DynamicsParams::default()).unwrap();
        let s = d.initial_state(Vec2::zeros(), 0.0, 0.65);
        let pitch = d.body_pitch(&s);
        let arms = [s.limbs.arm_com[0] + Vec2::new(0.1, 0.0), s.limbs.arm_com[1] + Vec2::new(0.1, 0.0)];
        let moved = d.set_arms(&s, arms);
        assert!((d.body_pitch(&moved) - pitch).abs() < 1e-12);
        assert!(moved.lean_angle > s.lean_angle);
    }
}
