//! One servo step by hand: interaction matrix, pseudo-inverse, camera twist
//! and the robot effort, for the full twist and the actuated columns only.
//!
//! `cargo run --example ibvs_step`

use fogservo::ibvs::{
    control_law, control_law_masked, interaction_matrix, pseudo_inverse, robot_effort, ActuatorLimits, FeatureError,
    ACTUATED,
};
use nalgebra::Vector2;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (x, y, z) = (0.08, -0.02, 0.6);
    let l = interaction_matrix(x, y, z)?;
    println!("L ={:.4}", l.matrix);
    let pinv = pseudo_inverse(&l.matrix)?;
    println!("L+ ={:.4}", pinv);
    println!("L L+ ={:.4}", l.matrix * pinv);

    let error = FeatureError::horizontal(Vector2::new(x, y), Vector2::new(0.0, 0.0), z);
    let limits = ActuatorLimits::default();
    for (label, twist) in [("full", control_law(&error, 0.8)?), ("actuated", control_law_masked(&error, 0.8, ACTUATED)?)] {
        println!("{label}: v_c = {:?}", twist.camera.as_slice());
        println!("{label}: effort = {:?}", robot_effort(&twist.robot, &limits));
    }
    Ok(())
}
