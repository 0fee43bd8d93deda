use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::{interaction_matrix, pseudo_inverse, IbvsError, Twist};

/// Feature error `e = s - s*` in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureError {
    pub s: Vector2<f64>,
    pub s_star: Vector2<f64>,
    pub e: Vector2<f64>,
    /// Depth of the feature point, m.
    pub depth: f64,
}

impl FeatureError {
    pub fn new(s: Vector2<f64>, s_star: Vector2<f64>, depth: f64) -> Self {
        Self { s, s_star, e: s - s_star, depth }
    }

    /// Error on `x` only (the desired `y` is taken to be the measured one).
    pub fn horizontal(s: Vector2<f64>, s_star: Vector2<f64>, depth: f64) -> Self {
        Self::new(s, Vector2::new(s_star.x, s.y), depth)
    }
}

/// Camera twist that reduces the error and the robot effort derived from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServoTwist {
    /// `v_c = -lambda L+ e`.
    pub camera: Twist,
    /// `v_s = -v_c`.
    pub robot: Twist,
}

/// `v_c = -lambda L+ e` and `v_s = -v_c`.
pub fn control_law(error: &FeatureError, lambda: f64) -> Result<ServoTwist, IbvsError> {
    if !(lambda > 0.0) {
        return Err(IbvsError::InvalidGain(lambda));
    }
    let l = interaction_matrix(error.s.x, error.s.y, error.depth)?;
    let pinv = pseudo_inverse(&l.matrix)?;
    let camera = -lambda * (pinv * error.e);
    if camera.iter().any(|v| !v.is_finite()) {
        return Err(IbvsError::NonFinite);
    }
    Ok(ServoTwist { camera, robot: -camera })
}

/// Which twist components the pseudo-inverse may use.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwistMode {
    /// Full 6-DOF twist, projected onto the actuated DOFs afterwards.
    Full,
    /// Only `v_y`, `v_z` and `w_y`: the columns of `L` the robot can
    /// realise. Near the tag the full minimum-norm solution puts most of a
    /// horizontal correction into lateral motion, which is then discarded.
    #[default]
    Actuated,
}

/// Columns of the twist the robot can produce: `v_y`, `v_z`, `w_y`.
pub const ACTUATED: [bool; 6] = [false, true, true, false, true, false];

/// Like [`control_law`] but with `L` restricted to the columns in `mask`.
/// Masked-out components of the returned twist are zero.
pub fn control_law_masked(error: &FeatureError, lambda: f64, mask: [bool; 6]) -> Result<ServoTwist, IbvsError> {
    if !(lambda > 0.0) {
        return Err(IbvsError::InvalidGain(lambda));
    }
    let mut l = interaction_matrix(error.s.x, error.s.y, error.depth)?.matrix;
    for (j, keep) in mask.iter().enumerate() {
        if !keep {
            l.column_mut(j).fill(0.0);
        }
    }
    let pinv = pseudo_inverse(&l)?;
    let camera = -lambda * (pinv * error.e);
    if camera.iter().any(|v| !v.is_finite()) {
        return Err(IbvsError::NonFinite);
    }
    Ok(ServoTwist { camera, robot: -camera })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActuatorLimits {
    pub max_forward: f64,
    pub max_yaw_rate: f64,
    pub max_height_rate: f64,
}

impl Default for ActuatorLimits {
    fn default() -> Self {
        Self { max_forward: 0.4, max_yaw_rate: 0.6, max_height_rate: 0.1 }
    }
}

/// Commands for the robot's three actuated degrees of freedom.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RobotEffort {
    /// m/s, positive forward.
    pub forward: f64,
    /// rad/s, positive turning left.
    pub yaw_rate: f64,
    /// m/s, positive raising the body.
    pub height_rate: f64,
}

impl RobotEffort {
    pub fn is_finite(&self) -> bool {
        self.forward.is_finite() && self.yaw_rate.is_finite() && self.height_rate.is_finite()
    }

    pub fn clamped(self, limits: &ActuatorLimits) -> Self {
        Self {
            forward: self.forward.clamp(-limits.max_forward, limits.max_forward),
            yaw_rate: self.yaw_rate.clamp(-limits.max_yaw_rate, limits.max_yaw_rate),
            height_rate: self.height_rate.clamp(-limits.max_height_rate, limits.max_height_rate),
        }
    }
}

/// Projects a robot twist `v_s` onto the actuated DOFs.
///
/// The camera frame has X right, Y down, Z along the optical axis, so the
/// camera moving along +Z is the robot driving forward, moving along -Y is
/// the body rising, and rotating about -Y is a left turn. In terms of
/// `v_s = -v_c`: forward = `-v_s.z`, height rate = `v_s.y`, yaw rate =
/// `v_s.wy`. Lateral motion and the remaining rotations are not actuated.
pub fn robot_effort(v_s: &Twist, limits: &ActuatorLimits) -> RobotEffort {
    RobotEffort { forward: -v_s[2], yaw_rate: v_s[4], height_rate: v_s[1] }.clamped(limits)
}
