use super::{Dynamics, RobotState, Vec2};

impl Dynamics {
    /// Hip height above the wheel centre for a knee angle: vertical shin plus
    /// a thigh tilted by the knee angle.
    pub fn hip_height(&self, knee: f64) -> f64 {
        self.params().leg_segment * (1.0 + knee.cos())
    }

    /// Body height (hip above ground) for a knee angle.
    pub fn height_for_knee(&self, knee: f64) -> f64 {
        self.params().wheel_radius + self.hip_height(knee)
    }

    /// Inverse of [`Dynamics::height_for_knee`], clamped to the knee range.
    pub fn knee_for_height(&self, height: f64) -> f64 {
        let p = self.params();
        let c = ((height - p.wheel_radius) / p.leg_segment - 1.0).clamp(-1.0, 1.0);
        c.acos().clamp(p.knee_min, p.knee_max)
    }

    /// Moves the knees one control period toward the angle that gives
    /// `target_height`, at no more than `knee_slew_rate`.
    ///
    /// Out-of-range targets are clamped and flagged in `height_clamped`.
    /// Arm and carried-box CoMs ride on the torso, so they shift with the hip.
    pub fn set_height(&self, state: &RobotState, target_height: f64) -> RobotState {
        let p = self.params();
        let clamped = target_height.clamp(p.height_min, p.height_max);
        let goal = self.knee_for_height(clamped);
        let knee = state.limbs.leg_knee_angle;
        let max_step = p.knee_slew_rate * p.dt;
        let next_knee = knee + (goal - knee).clamp(-max_step, max_step);

        let mut next = state.clone();
        next.height_clamped = clamped != target_height;
        if next_knee == knee {
            return next;
        }
        let dz = self.hip_height(next_knee) - self.hip_height(knee);
        let mut limbs = state.limbs.clone();
        limbs.leg_knee_angle = next_knee;
        let hip = self.hip_height(next_knee);
        limbs.leg_com = [Vec2::new(0.0, 0.5 * hip); 2];
        for arm in &mut limbs.arm_com {
            arm.y += dz;
        }
        limbs.box_com.y += dz;
        next = self.with_limbs(&next, limbs);
        next.body_height = p.wheel_radius + hip;
        next
    }
}
