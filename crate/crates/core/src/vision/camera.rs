use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::dynamics::{Dynamics, RobotState, Vec2};

pub type Vec3 = Vector3<f64>;

/// Camera intrinsics, mount and visibility limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraModel {
    pub focal_px: f64,
    pub width: u32,
    pub height: u32,
    /// Mount position ahead of the torso axis, m.
    pub mount_forward: f64,
    /// Mount height above the hip, m.
    pub mount_above_hip: f64,
    /// Downward tilt of the optical axis relative to the torso, degrees.
    pub tilt_deg: f64,
    pub max_view_angle_deg: f64,
    pub view_margin_deg: f64,
    pub min_depth: f64,
    pub max_depth: f64,
    /// Standard deviation of Gaussian corner noise, px. Zero disables noise.
    pub noise_px: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            focal_px: 500.0,
            width: 640,
            height: 480,
            mount_forward: 0.06,
            mount_above_hip: 0.28,
            tilt_deg: 10.0,
            max_view_angle_deg: 20.0,
            view_margin_deg: 5.0,
            min_depth: 0.1,
            max_depth: 6.0,
            noise_px: 0.5,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.focal_px.is_finite() && self.focal_px > 0.0) {
            return Err(format!("focal_px must be > 0, got {}", self.focal_px));
        }
        if self.width == 0 || self.height == 0 {
            return Err("image size must be non-zero".into());
        }
        if !(self.min_depth >= 0.0 && self.max_depth > self.min_depth) {
            return Err("need 0 <= min_depth < max_depth".into());
        }
        if !(self.noise_px >= 0.0) {
            return Err("noise_px must be >= 0".into());
        }
        Ok(())
    }

    pub fn principal_point(&self) -> (f64, f64) {
        (self.width as f64 / 2.0, self.height as f64 / 2.0)
    }

    /// Normalized image coordinates to pixels.
    pub fn to_pixels(&self, x: f64, y: f64) -> (f64, f64) {
        let (cx, cy) = self.principal_point();
        (cx + self.focal_px * x, cy + self.focal_px * y)
    }

    /// Pixels to normalized image coordinates.
    pub fn to_normalized(&self, u: f64, v: f64) -> (f64, f64) {
        let (cx, cy) = self.principal_point();
        ((u - cx) / self.focal_px, (v - cy) / self.focal_px)
    }

    pub fn in_image(&self, u: f64, v: f64) -> bool {
        (0.0..=self.width as f64).contains(&u) && (0.0..=self.height as f64).contains(&v)
    }

    /// Camera pose for a robot body pose.
    pub fn pose(&self, body: &BodyPose) -> CameraPose {
        let (s, c) = body.pitch.sin_cos();
        let pitch = |f: f64, u: f64| (f * c + u * s, -f * s + u * c);
        let (mf, mu) = pitch(self.mount_forward, body.hip_height + self.mount_above_hip);
        let tilt = self.tilt_deg.to_radians();
        let (af, au) = pitch(tilt.cos(), -tilt.sin());

        let (hs, hc) = body.heading.sin_cos();
        let forward = Vec3::new(hc, hs, 0.0);
        let left = Vec3::new(-hs, hc, 0.0);
        let up = Vec3::z();
        let position = Vec3::new(body.ground_pos.x, body.ground_pos.y, body.wheel_radius) + mf * forward + mu * up;
        let z_axis = af * forward + au * up;
        let x_axis = -left;
        let y_axis = z_axis.cross(&x_axis);
        CameraPose { position, world_to_camera: Matrix3::from_rows(&[x_axis.transpose(), y_axis.transpose(), z_axis.transpose()]) }
    }
}

/// What the camera needs to know about the robot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyPose {
    pub ground_pos: Vec2,
    pub heading: f64,
    pub wheel_radius: f64,
    /// Hip above the wheel centre, m.
    pub hip_height: f64,
    pub pitch: f64,
}

impl BodyPose {
    pub fn of(dynamics: &Dynamics, state: &RobotState) -> Self {
        Self {
            ground_pos: state.ground_pos,
            heading: state.heading,
            wheel_radius: dynamics.params().wheel_radius,
            hip_height: dynamics.hip_height(state.limbs.leg_knee_angle),
            pitch: dynamics.body_pitch(state),
        }
    }
}

/// Rigid camera pose: frame X right, Y down, Z along the optical axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub position: Vec3,
    /// Rows are the camera axes expressed in the world frame.
    pub world_to_camera: Matrix3<f64>,
}

impl CameraPose {
    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.world_to_camera * (p - self.position)
    }

    pub fn optical_axis(&self) -> Vec3 {
        self.world_to_camera.row(2).transpose()
    }
}
