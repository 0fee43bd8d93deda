//! Synthetic camera and fiducial-tag observations.
//!
//! Nothing is rasterised. Tag corners are transformed into the camera frame
//! and projected through a pinhole model (`x = X/Z`, `y = Y/Z`, scaled by the
//! focal length), which yields the pixel features the visual servo consumes:
//! tag centre and apparent side length.

mod camera;

pub use camera::{BodyPose, CameraModel, CameraPose, Vec3};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::Micros;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VisionError {
    #[error("no measurement: tag not visible")]
    NotVisible,
    #[error("recognition rate must be in [1, 10] Hz, got {0}")]
    InvalidRate(f64),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
}

/// A square fiducial tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagTarget {
    pub center: Vec3,
    /// Unit normal pointing out of the printed face.
    pub normal: Vec3,
    /// Side length, m.
    pub side: f64,
}

impl TagTarget {
    /// Tag with a horizontal normal at `yaw` (radians, world frame).
    pub fn facing(center: Vec3, yaw: f64, side: f64) -> Self {
        Self { center, normal: Vec3::new(yaw.cos(), yaw.sin(), 0.0), side }
    }

    /// Corners as seen from the front: top-left, top-right, bottom-right,
    /// bottom-left.
    pub fn corners(&self) -> [Vec3; 4] {
        let n = self.normal.normalize();
        let mut right = Vec3::z().cross(&n);
        if right.norm() < 1e-9 {
            right = Vec3::x();
        }
        let right = right.normalize();
        let up = n.cross(&right);
        let h = self.side / 2.0;
        let c = self.center;
        [c - right * h + up * h, c + right * h + up * h, c + right * h - up * h, c - right * h - up * h]
    }
}

/// Pixel features of one detection. Invisible observations carry zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagObservation {
    pub visible: bool,
    pub center: [f64; 2],
    pub side_px: f64,
    pub corners: [[f64; 2]; 4],
    /// Capture time, µs.
    pub timestamp: Micros,
}

impl TagObservation {
    pub fn invisible(timestamp: Micros) -> Self {
        Self { visible: false, center: [0.0; 2], side_px: 0.0, corners: [[0.0; 2]; 4], timestamp }
    }
}

/// Normalized image coordinates of a camera-frame point.
pub fn project_point(p: &Vec3) -> (f64, f64) {
    (p.x / p.z, p.y / p.z)
}

/// Angle between the tag normal and the line of sight to the camera, rad.
pub fn viewing_angle(pose: &CameraPose, target: &TagTarget) -> f64 {
    let to_cam = (pose.position - target.center).normalize();
    to_cam.dot(&target.normal.normalize()).clamp(-1.0, 1.0).acos()
}

/// Noise-free projection of `target`.
pub fn project(camera: &CameraModel, pose: &CameraPose, target: &TagTarget, timestamp: Micros) -> TagObservation {
    project_with_limit(camera, pose, target, timestamp, camera.max_view_angle_deg + camera.view_margin_deg)
}

/// As [`project`] with an explicit viewing-angle limit in degrees.
pub fn project_with_limit(
    camera: &CameraModel,
    pose: &CameraPose,
    target: &TagTarget,
    timestamp: Micros,
    max_angle_deg: f64,
) -> TagObservation {
    let center_cam = pose.to_camera(&target.center);
    let in_depth = center_cam.z > camera.min_depth && center_cam.z <= camera.max_depth;
    if !in_depth || viewing_angle(pose, target) > max_angle_deg.to_radians() {
        return TagObservation::invisible(timestamp);
    }
    let mut corners = [[0.0; 2]; 4];
    for (out, corner) in corners.iter_mut().zip(target.corners()) {
        let p = pose.to_camera(&corner);
        if p.z <= 0.0 {
            return TagObservation::invisible(timestamp);
        }
        let (x, y) = project_point(&p);
        let (u, v) = camera.to_pixels(x, y);
        if !camera.in_image(u, v) {
            return TagObservation::invisible(timestamp);
        }
        *out = [u, v];
    }
    let (x, y) = project_point(&center_cam);
    let (u, v) = camera.to_pixels(x, y);
    TagObservation { visible: true, center: [u, v], side_px: side_length(&corners), corners, timestamp }
}

/// Projection with Gaussian corner noise of `camera.noise_px`. The centre is
/// re-derived from the noisy corners as the intersection of the diagonals.
pub fn observe<R: Rng>(
    camera: &CameraModel,
    pose: &CameraPose,
    target: &TagTarget,
    timestamp: Micros,
    rng: &mut R,
) -> TagObservation {
    let mut obs = project(camera, pose, target, timestamp);
    if !obs.visible || camera.noise_px <= 0.0 {
        return obs;
    }
    let noise = Normal::new(0.0, camera.noise_px).expect("noise_px validated");
    for c in &mut obs.corners {
        c[0] += noise.sample(rng);
        c[1] += noise.sample(rng);
    }
    if let Some(center) = diagonal_intersection(&obs.corners) {
        obs.center = center;
    }
    obs.side_px = side_length(&obs.corners);
    obs
}

/// Apparent side: mean length of the top and bottom edges.
pub fn side_length(corners: &[[f64; 2]; 4]) -> f64 {
    let d = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    0.5 * (d(corners[0], corners[1]) + d(corners[3], corners[2]))
}

fn diagonal_intersection(c: &[[f64; 2]; 4]) -> Option<[f64; 2]> {
    let (p, r) = (c[0], [c[2][0] - c[0][0], c[2][1] - c[0][1]]);
    let (q, s) = (c[1], [c[3][0] - c[1][0], c[3][1] - c[1][1]]);
    let denom = r[0] * s[1] - r[1] * s[0];
    if denom.abs() < 1e-12 {
        return None;
    }
    let t = ((q[0] - p[0]) * s[1] - (q[1] - p[1]) * s[0]) / denom;
    Some([p[0] + t * r[0], p[1] + t * r[1]])
}

/// Depth from apparent size: `Z = f * side / side_px`.
pub fn depth_from_size(obs: &TagObservation, camera: &CameraModel, side_world: f64) -> Result<f64, VisionError> {
    if !obs.visible || !(obs.side_px > 0.0) {
        return Err(VisionError::NotVisible);
    }
    Ok(camera.focal_px * side_world / obs.side_px)
}

/// Rate-limited tag recognition.
///
/// Frames are captured on a fixed period; each capture yields an
/// observation, invisible ones included, so consumers can tell "lost" from
/// "no news".
#[derive(Debug, Clone)]
pub struct RecognitionService {
    camera: CameraModel,
    period: Micros,
    next_due: Micros,
    rng: ChaCha8Rng,
}

impl RecognitionService {
    pub fn new(camera: CameraModel, rate_hz: f64, seed: u64) -> Result<Self, VisionError> {
        if !(1.0..=10.0).contains(&rate_hz) {
            return Err(VisionError::InvalidRate(rate_hz));
        }
        camera.validate().map_err(VisionError::InvalidCamera)?;
        Ok(Self {
            camera,
            period: (1e6 / rate_hz).round() as Micros,
            next_due: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn camera(&self) -> &CameraModel {
        &self.camera
    }

    pub fn period(&self) -> Micros {
        self.period
    }

    pub fn next_capture(&self) -> Micros {
        self.next_due
    }

    pub fn capture(&mut self, now: Micros, pose: &CameraPose, target: &TagTarget) -> Option<TagObservation> {
        if now < self.next_due {
            return None;
        }
        while self.next_due <= now {
            self.next_due += self.period;
        }
        Some(observe(&self.camera, pose, target, now, &mut self.rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Vec2;
    use proptest::prelude::*;

    fn ideal_camera() -> CameraModel {
        CameraModel { noise_px: 0.0, tilt_deg: 0.0, ..CameraModel::default() }
    }

    /// Camera at the origin looking along world +x.
    fn origin_pose(camera: &CameraModel) -> CameraPose {
        let body = BodyPose { ground_pos: Vec2::zeros(), heading: 0.0, wheel_radius: 0.0, hip_height: -camera.mount_above_hip, pitch: 0.0 };
        let mut pose = camera.pose(&body);
        pose.position = Vec3::zeros();
        pose
    }

    /// Tag `depth` metres ahead, facing the camera.
    fn tag_ahead(depth: f64, lateral: f64, up: f64) -> TagTarget {
        TagTarget::facing(Vec3::new(depth, lateral, up), std::f64::consts::PI, 0.1)
    }

    #[test]
    fn normalized_coordinates() {
        assert_eq!(project_point(&Vec3::new(1.0, 2.0, 4.0)), (0.25, 0.5));
    }

    #[test]
    fn camera_axes() {
        let cam = ideal_camera();
        let pose = origin_pose(&cam);
        // Forward, right and down in camera terms.
        assert!((pose.to_camera(&Vec3::new(1.0, 0.0, 0.0)) - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
        assert!((pose.to_camera(&Vec3::new(0.0, -1.0, 0.0)) - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
        assert!((pose.to_camera(&Vec3::new(0.0, 0.0, -1.0)) - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn axial_tag_is_centred() {
        let cam = ideal_camera();
        let z = 500.0 * 0.1 / 64.0;
        let obs = project(&cam, &origin_pose(&cam), &tag_ahead(z, 0.0, 0.0), 0);
        assert!(obs.visible);
        assert!((obs.center[0] - 320.0).abs() < 1e-9 && (obs.center[1] - 240.0).abs() < 1e-9);
        assert!((obs.side_px - 64.0).abs() < 1e-9);
    }

    #[test]
    fn depth_from_side() {
        let cam = ideal_camera();
        let mut obs = TagObservation::invisible(0);
        assert_eq!(depth_from_size(&obs, &cam, 0.1), Err(VisionError::NotVisible));
        obs.visible = true;
        obs.side_px = 50.0;
        assert!((depth_from_size(&obs, &cam, 0.1).unwrap() - 1.0).abs() < 1e-12);
        obs.side_px = 100.0;
        assert!((depth_from_size(&obs, &cam, 0.1).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn oblique_view_depth_bias() {
        let cam = ideal_camera();
        let pose = origin_pose(&cam);
        let mut tag = tag_ahead(2.0, 0.0, 0.0);
        let yaw = std::f64::consts::PI + 20f64.to_radians();
        tag.normal = Vec3::new(yaw.cos(), yaw.sin(), 0.0);
        let obs = project(&cam, &pose, &tag, 0);
        assert!(obs.visible);
        let z = depth_from_size(&obs, &cam, 0.1).unwrap();
        // Independent evaluation of the four corner projections
        assert!((z - 2.128_111_840_275_338).abs() < 1e-9, "{z}");
        assert!((1.85..=2.15).contains(&z));
    }

    #[test]
    fn view_angle_limit() {
        let cam = ideal_camera();
        let pose = origin_pose(&cam);
        let mut tag = tag_ahead(2.0, 0.0, 0.0);
        let yaw = std::f64::consts::PI + 30f64.to_radians();
        tag.normal = Vec3::new(yaw.cos(), yaw.sin(), 0.0);
        assert!(!project(&cam, &pose, &tag, 0).visible);
        tag.normal = Vec3::new(-1.0, 0.0, 0.0);
        tag.center.x = 6.5;
        assert!(!project(&cam, &pose, &tag, 0).visible);
        tag.center.x = -1.0;
        assert!(!project(&cam, &pose, &tag, 0).visible);
    }

    #[test]
    fn tilted_mount_sees_low_targets() {
        let cam = CameraModel { noise_px: 0.0, ..CameraModel::default() };
        let body = BodyPose { ground_pos: Vec2::zeros(), heading: 0.0, wheel_radius: 0.08, hip_height: 0.57, pitch: 0.0 };
        let pose = cam.pose(&body);
        assert!((pose.position - Vec3::new(0.06, 0.0, 0.93)).norm() < 1e-12);
        let axis = pose.optical_axis();
        assert!((axis.z + 10f64.to_radians().sin()).abs() < 1e-12);
        // A point on the optical axis images at the principal point.
        let p = pose.position + axis * 1.5;
        let (x, y) = project_point(&pose.to_camera(&p));
        assert!(x.abs() < 1e-12 && y.abs() < 1e-12);
    }

    #[test]
    fn noise_is_seeded() {
        let cam = CameraModel { tilt_deg: 0.0, ..CameraModel::default() };
        let pose = origin_pose(&cam);
        let tag = tag_ahead(1.0, 0.0, 0.0);
        let a = observe(&cam, &pose, &tag, 0, &mut ChaCha8Rng::seed_from_u64(1));
        let b = observe(&cam, &pose, &tag, 0, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);
        assert!((a.side_px - 50.0).abs() < 3.0);
        assert!(a.side_px != 50.0);
    }

    #[test]
    fn recognition_rate_and_liveness() {
        assert!(RecognitionService::new(CameraModel::default(), 0.5, 0).is_err());
        let cam = ideal_camera();
        let pose = origin_pose(&cam);
        let mut svc = RecognitionService::new(cam, 5.0, 0).unwrap();
        let hidden = tag_ahead(-2.0, 0.0, 0.0);
        let frames: Vec<_> = (0..1_000_000u64).step_by(5_000).filter_map(|t| svc.capture(t, &pose, &hidden)).collect();
        assert_eq!(frames.len(), 5);
        assert!(frames.iter().all(|f| !f.visible));
        assert_eq!(frames[1].timestamp, 200_000);
    }

    proptest! {
        #[test]
        fn projection_is_scale_invariant(x in -2.0f64..2.0, y in -2.0f64..2.0, z in 0.1f64..5.0, c in 0.01f64..100.0) {
            let (a, b) = project_point(&Vec3::new(x, y, z));
            let (a2, b2) = project_point(&Vec3::new(c * x, c * y, c * z));
            prop_assert!((a - a2).abs() < 1e-9 && (b - b2).abs() < 1e-9);
        }

        #[test]
        fn axial_depth_roundtrip(z in 0.2f64..6.0) {
            let cam = ideal_camera();
            let obs = project(&cam, &origin_pose(&cam), &tag_ahead(z, 0.0, 0.0), 0);
            prop_assert!(obs.visible);
            prop_assert!((depth_from_size(&obs, &cam, 0.1).unwrap() - z).abs() < 1e-9);
        }

        #[test]
        fn off_axis_depth_within_two_percent(z in 0.5f64..5.0, lat in -0.15f64..0.15, up in -0.15f64..0.15) {
            let cam = ideal_camera();
            let obs = project(&cam, &origin_pose(&cam), &tag_ahead(z, lat * z, up * z), 0);
            prop_assume!(obs.visible);
            let est = depth_from_size(&obs, &cam, 0.1).unwrap();
            prop_assert!((est - z).abs() / z < 0.02);
        }

        #[test]
        fn visibility_monotone_in_view_limit(yaw_deg in -40.0f64..40.0, lim in 0.0f64..40.0, shrink in 0.0f64..40.0) {
            let cam = ideal_camera();
            let pose = origin_pose(&cam);
            let mut tag = tag_ahead(2.0, 0.0, 0.0);
            let yaw = std::f64::consts::PI + yaw_deg.to_radians();
            tag.normal = Vec3::new(yaw.cos(), yaw.sin(), 0.0);
            let wide = project_with_limit(&cam, &pose, &tag, 0, lim).visible;
            let narrow = project_with_limit(&cam, &pose, &tag, 0, lim - shrink).visible;
            prop_assert!(wide || !narrow);
        }

        #[test]
        fn visible_observations_are_inside_image(x in 0.2f64..7.0, y in -3.0f64..3.0, z in -2.0f64..2.0) {
            let cam = ideal_camera();
            let obs = project(&cam, &origin_pose(&cam), &tag_ahead(x, y, z), 0);
            if obs.visible {
                prop_assert!(obs.side_px > 0.0);
                for c in obs.corners {
                    prop_assert!(cam.in_image(c[0], c[1]));
                }
            }
        }
    }
}
