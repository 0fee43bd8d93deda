//! Image-based visual servoing and the automatic pickup sequence.
//!
//! The servo uses a single point feature, the tag centre, whose image
//! velocity relates to the camera twist through the 2x6 interaction matrix.
//! The apparent tag size is handled as a separate depth channel.

mod calibrate;
mod control;
mod matrix;
mod pickup;

pub use calibrate::{calibrate_target_size, Calibration, CalibrationTrial};
pub use control::{
    control_law, control_law_masked, robot_effort, ActuatorLimits, FeatureError, RobotEffort, ServoTwist, TwistMode,
    ACTUATED,
};
pub use matrix::{interaction_matrix, pseudo_inverse, InteractionMatrix, Mat2x6, Mat6x2, Twist};
pub use pickup::{
    DepthMode, GraspStatus, Outcome, Phase, PhaseRecord, PickupConfig, PickupMachine, PickupOutput,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IbvsError {
    #[error("invalid depth {0}: must be finite and > 0")]
    InvalidDepth(f64),
    #[error("interaction matrix is rank deficient")]
    Degenerate,
    #[error("servo gain must be > 0, got {0}")]
    InvalidGain(f64),
    #[error("servo produced a non-finite twist")]
    NonFinite,
    #[error("invalid servo configuration: {0}")]
    InvalidConfig(String),
    #[error("no candidate standoff produced a successful grasp; revise the grasp script")]
    CalibrationFailed,
}
