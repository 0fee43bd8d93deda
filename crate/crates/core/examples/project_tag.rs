//! Projects the tag from a few robot poses and recovers depth from its
//! apparent size.
//!
//! `cargo run --example project_tag`

use fogservo::dynamics::{Dynamics, DynamicsParams, Vec2};
use fogservo::vision::{depth_from_size, project, viewing_angle, BodyPose, CameraModel, TagTarget, Vec3};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let camera = CameraModel { noise_px: 0.0, ..CameraModel::default() };
    let dynamics = Dynamics::new(DynamicsParams::default())?;
    let tag = TagTarget::facing(Vec3::new(0.0, 0.0, 0.75), std::f64::consts::PI, 0.1);

    for (x, y, heading_deg) in [(-2.0, 0.0, 0.0), (-1.0, 0.0, 0.0), (-1.0, 0.2, -5.0), (-0.5, 0.0, 0.0), (-0.3, 0.3, -30.0)] {
        let state = dynamics.initial_state(Vec2::new(x, y), f64::to_radians(heading_deg), 0.55);
        let pose = camera.pose(&BodyPose::of(&dynamics, &state));
        let obs = project(&camera, &pose, &tag, 0);
        let angle = viewing_angle(&pose, &tag).to_degrees();
        match depth_from_size(&obs, &camera, tag.side) {
            Ok(z) => println!(
                "robot ({x:5.2}, {y:4.2}, {heading_deg:5.1} deg): centre ({:6.1}, {:6.1}) side {:6.1} px  Z {z:.3} m  angle {angle:4.1} deg",
                obs.center[0], obs.center[1], obs.side_px
            ),
            Err(e) => println!("robot ({x:5.2}, {y:4.2}, {heading_deg:5.1} deg): {e} (angle {angle:4.1} deg)"),
        }
    }
    Ok(())
}
