use super::{Dynamics, RobotState, Vec2};

/// Wheel surface velocity that keeps the wheel under a CoM moving at `v`
/// while the pendulum rotates at `lean_rate`: `T = R * omega = v - psi_dot * |L|`.
pub fn wheel_velocity(v: f64, lean_rate: f64, length: f64) -> f64 {
    v - lean_rate * length
}

/// Left/right wheel surface velocity command expressed as common mode plus
/// a symmetric differential (`left = common - differential`).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WheelCommand {
    pub common: f64,
    pub differential: f64,
}

impl WheelCommand {
    pub fn straight(common: f64) -> Self {
        Self { common, differential: 0.0 }
    }
}

impl Dynamics {
    /// Balance controller.
    ///
    /// The lean-rate setpoint is proportional to the CoM velocity error
    /// (coefficient `velocity_to_lean_rate`) plus a lean-angle term. The wheel
    /// command is the velocity that keeps the wheel under the current CoM,
    /// [`wheel_velocity`], corrected by the wheel acceleration needed to track
    /// that setpoint over one servo time constant. Saturates at
    /// `max_wheel_command`.
    pub fn balance_command(&self, state: &RobotState, v_des: f64) -> f64 {
        let p = self.params();
        let length = self.pendulum_length(state);
        let psi = state.lean_angle;
        let lean_rate_target =
            -p.velocity_to_lean_rate * (state.com_velocity - v_des) - p.lean_gain * psi;
        let accel = p.gravity * psi + length * p.lean_rate_gain * (state.lean_rate - lean_rate_target);
        let t = wheel_velocity(state.com_velocity, state.lean_rate, length) + p.wheel_lag * accel;
        t.clamp(-p.max_wheel_command, p.max_wheel_command)
    }

    /// Balance command plus the yaw-rate differential.
    pub fn wheel_command(&self, state: &RobotState, v_des: f64, yaw_rate_des: f64) -> WheelCommand {
        let p = self.params();
        let yaw = yaw_rate_des + p.yaw_gain * (yaw_rate_des - state.yaw_rate);
        WheelCommand {
            common: self.balance_command(state, v_des),
            differential: 0.5 * p.track_width * yaw,
        }
    }

    /// Advances the pendulum-on-wheels model by `dt` with semi-implicit Euler.
    ///
    /// The wheels track the commanded surface velocity through a first-order
    /// servo; the resulting axle acceleration `a` drives
    /// `psi_ddot = (g/|L|) sin(psi) - (a/|L|) cos(psi)`. A fallen state is
    /// terminal: only the clock advances.
    pub fn step(&self, state: &RobotState, cmd: WheelCommand, dt: f64) -> RobotState {
        let p = self.params();
        let mut next = state.clone();
        next.time = state.time + (dt * 1e6).round() as u64;
        if state.fallen {
            return next;
        }
        let length = self.pendulum_length(state);
        let base = state.wheel_speed * p.wheel_radius;
        let accel = ((cmd.common - base) / p.wheel_lag).clamp(-p.max_wheel_accel, p.max_wheel_accel);
        let (sin, cos) = state.lean_angle.sin_cos();
        let lean_accel = (p.gravity / length) * sin - (accel / length) * cos;

        next.lean_rate = state.lean_rate + lean_accel * dt;
        next.lean_angle = state.lean_angle + next.lean_rate * dt;
        let base_next = base + accel * dt;
        next.wheel_speed = base_next / p.wheel_radius;

        let yaw_target = 2.0 * cmd.differential / p.track_width;
        next.yaw_rate = state.yaw_rate + (yaw_target - state.yaw_rate) * (dt / p.wheel_lag).min(1.0);
        next.heading = state.heading + next.yaw_rate * dt;
        next.ground_pos =
            state.ground_pos + base_next * dt * Vec2::new(next.heading.cos(), next.heading.sin());
        next.com_velocity = base_next + length * next.lean_rate * next.lean_angle.cos();
        if next.lean_angle.abs() >= p.fall_angle {
            next.fallen = true;
        }
        next
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::DynamicsParams;

    fn robot() -> (Dynamics, RobotState) {
        let d = Dynamics::new(DynamicsParams::default()).unwrap();
        let s = d.initial_state(Vec2::zeros(), 0.0, 0.65);
        (d, s)
    }

    #[test]
    fn wheel_velocity_substitution() {
        assert!((wheel_velocity(0.5, 0.1, 1.0) - 0.4).abs() < 1e-15);
        assert_eq!(wheel_velocity(0.0, 0.0, 1.0), 0.0);
    }

    #[test]
    fn equilibrium_produces_no_actuation() {
        let (d, s) = robot();
        assert_eq!(d.balance_command(&s, 0.0), 0.0);
    }

    #[test]
    fn command_saturates() {
        let (d, mut s) = robot();
        s.lean_angle = 0.3;
        s.com_velocity = 3.0;
        assert_eq!(d.balance_command(&s, 0.0), d.params().max_wheel_command);
        s.com_velocity = -3.0;
        s.lean_angle = -0.3;
        assert_eq!(d.balance_command(&s, 0.0), -d.params().max_wheel_command);
    }

    #[test]
    fn equilibrium_fixed_point() {
        let (d, s) = robot();
        let n = d.step(&s, WheelCommand::default(), d.params().dt);
        assert_eq!(n.time, 5000);
        let mut expect = s.clone();
        expect.time = n.time;
        assert_eq!(n, expect);
    }

    #[test]
    fn gravity_accelerates_a_lean() {
        let (d, mut s) = robot();
        s.lean_angle = 0.01;
        let n = d.step(&s, WheelCommand::default(), d.params().dt);
        assert!(n.lean_rate > 0.0);
    }

    #[test]
    fn falls_without_control_and_stays_fallen() {
        let (d, mut s) = robot();
        s.lean_angle = 0.05;
        for _ in 0..2000 {
            s = d.step(&s, WheelCommand::default(), d.params().dt);
        }
        assert!(s.fallen);
        let frozen = d.step(&s, WheelCommand::straight(1.0), d.params().dt);
        assert_eq!(frozen.lean_angle, s.lean_angle);
    }

    #[test]
    fn recovers_from_five_degrees() {
        let (d, mut s) = robot();
        s.lean_angle = 5f64.to_radians();
        let dt = d.params().dt;
        for i in 0..2000 {
            let cmd = d.wheel_command(&s, 0.0, 0.0);
            s = d.step(&s, cmd, dt);
            assert!(!s.fallen);
            if i >= 600 {
                assert!(s.lean_angle.abs() < 0.5f64.to_radians(), "t={} psi={}", i, s.lean_angle);
            }
        }
    }

    #[test]
    fn tracks_velocity_and_yaw_commands() {
        let (d, mut s) = robot();
        let dt = d.params().dt;
        for _ in 0..2000 {
            let cmd = d.wheel_command(&s, 0.3, 0.2);
            s = d.step(&s, cmd, dt);
        }
        assert!((s.com_velocity - 0.3).abs() < 0.01, "{}", s.com_velocity);
        assert!((s.yaw_rate - 0.2).abs() < 0.01, "{}", s.yaw_rate);
    }

    #[test]
    fn bit_identical_replay() {
        let (d, s0) = robot();
        let run = || {
            let mut s = s0.clone();
            s.lean_angle = 0.07;
            let mut log = Vec::new();
            for i in 0..500 {
                let cmd = d.wheel_command(&s, if i > 100 { 0.2 } else { 0.0 }, 0.1);
                s = d.step(&s, cmd, d.params().dt);
                log.push(s.lean_angle.to_bits());
            }
            log
        };
        assert_eq!(run(), run());
    }
}
