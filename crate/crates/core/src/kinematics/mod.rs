//! Analytic kinematic chains: cobot arms loaded from JSON and a planar
//! human arm model used to synthesize and interpret demonstrations.

mod human;
mod robot;

pub use human::{
    human_arm_fk, joint_angles_from_keypoints, wrap_angle, ArmKeypoints, HumanAngles,
    HumanArmGeometry, HUMAN_ANGLE_LIMITS,
};
pub use robot::{FkResult, Joint, RobotSpec, ROBOT_SCHEMA_VERSION};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("expected {expected} joint angles, got {got}")]
    JointCount { expected: usize, got: usize },
    #[error("invalid robot spec: {0}")]
    InvalidSpec(String),
    #[error("degenerate keypoints: {0}")]
    Degenerate(String),
    #[error("unreachable: {0}")]
    Unreachable(String),
    #[error("reading robot spec: {0}")]
    Io(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
