use super::{DynamicsError, Vec2};

/// Inverted-pendulum geometry in the sagittal plane `(forward, up)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumGeometry {
    pub com: Vec2,
    pub wheel_center: Vec2,
    /// `com - wheel_center`.
    pub pendulum_vec: Vec2,
    /// Unit vector pointing along gravity.
    pub gravity_dir: Vec2,
    pub length: f64,
    pub wheel_radius: f64,
}

impl PendulumGeometry {
    pub fn new(com: Vec2, wheel_center: Vec2, gravity: Vec2, wheel_radius: f64) -> Self {
        let pendulum_vec = com - wheel_center;
        Self {
            com,
            wheel_center,
            pendulum_vec,
            gravity_dir: gravity.normalize(),
            length: pendulum_vec.norm(),
            wheel_radius,
        }
    }

    /// Geometry from a bare pendulum vector with the wheel centre at the origin.
    pub fn from_vectors(pendulum_vec: Vec2, gravity: Vec2) -> Self {
        Self::new(pendulum_vec, Vec2::zeros(), gravity, 0.0)
    }
}

/// Signed lean angle: the angle between the pendulum vector and the
/// anti-gravity direction, positive when the CoM is ahead of the wheel.
///
/// The magnitude is `acos(L . (-G) / (|L||G|))`; an upright pendulum gives 0.
pub fn lean_angle(geometry: &PendulumGeometry) -> Result<f64, DynamicsError> {
    let l = geometry.pendulum_vec;
    let norm = l.norm();
    if !(norm > 1e-9) {
        return Err(DynamicsError::SingularGeometry(norm));
    }
    let up = -geometry.gravity_dir;
    let cos = (l.dot(&up) / (norm * up.norm())).clamp(-1.0, 1.0);
    // Forward is the direction obtained by turning "up" clockwise.
    let forward_component = l.x * up.y - l.y * up.x;
    let magnitude = cos.acos();
    Ok(if forward_component < 0.0 { -magnitude } else { magnitude })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn angle(l: Vec2) -> f64 {
        lean_angle(&PendulumGeometry::from_vectors(l, Vec2::new(0.0, -1.0))).unwrap()
    }

    #[test]
    fn upright_is_zero() {
        assert_eq!(angle(Vec2::new(0.0, 1.0)), 0.0);
    }

    #[test]
    fn forty_five_degrees_forward() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((angle(Vec2::new(s, s)) - FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn small_backward_lean() {
        // arccos(0.995 / |(-0.1, 0.995)|), negative because the CoM is behind.
        assert!((angle(Vec2::new(-0.1, 0.995)) - (-0.10016616488792561)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_vector_is_an_error() {
        let g = PendulumGeometry::from_vectors(Vec2::new(1e-12, 0.0), Vec2::new(0.0, -1.0));
        assert!(matches!(lean_angle(&g), Err(DynamicsError::SingularGeometry(_))));
    }

    #[test]
    fn geometry_invariants() {
        let g = PendulumGeometry::new(
            Vec2::new(0.3, 0.9),
            Vec2::new(0.1, 0.08),
            Vec2::new(0.0, -3.0),
            0.08,
        );
        assert_eq!(g.pendulum_vec, g.com - g.wheel_center);
        assert!((g.gravity_dir.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn continuous_and_bounded_for_upper_half_plane() {
        let mut prev = angle(Vec2::new(-1.0, 1e-3));
        for i in 1..=2000 {
            let th = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * i as f64 / 2000.0;
            let a = angle(Vec2::new(th.sin(), th.cos().max(1e-3)));
            assert!(a.abs() <= std::f64::consts::FRAC_PI_2 + 1e-9);
            assert!((a - prev).abs() < 0.01);
            prev = a;
        }
    }
}
