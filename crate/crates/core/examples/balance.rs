//! Recovery from a 5 degree lean, then a velocity step, at 200 Hz.
//!
//! `cargo run --example balance`

use fogservo::dynamics::{Dynamics, DynamicsParams, Vec2};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dynamics = Dynamics::new(DynamicsParams::default())?;
    let dt = dynamics.params().dt;
    let mut state = dynamics.initial_state(Vec2::zeros(), 0.0, 0.55);
    state.lean_angle = 5f64.to_radians();

    println!("{:>6} {:>9} {:>9} {:>8}", "t", "psi_deg", "v", "x");
    let steps = (8.0 / dt).round() as usize;
    for i in 0..=steps {
        let t = i as f64 * dt;
        let v_des = if t >= 4.0 { 0.3 } else { 0.0 };
        if i % 40 == 0 {
            println!(
                "{t:6.2} {:9.4} {:9.4} {:8.4}",
                state.lean_angle.to_degrees(),
                state.com_velocity,
                state.ground_pos.x
            );
        }
        let cmd = dynamics.wheel_command(&state, v_des, 0.0);
        state = dynamics.step(&state, cmd, dt);
    }
    println!("fallen: {}", state.fallen);
    Ok(())
}
