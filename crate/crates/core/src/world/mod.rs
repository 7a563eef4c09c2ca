//! Synthetic stand-in for the camera and detector stack: the depth-camera
//! conversion, object-of-interest selection, a scripted sorting/pouring
//! expert, and demonstration streams with keypoint noise and dropout.

mod camera;
mod demo;
mod detect;
mod scene;

pub use camera::{CameraModel, PixelDepth};
pub use demo::{
    demonstrator_pose, generate_demonstration, task_labels, DemoHeader, Demonstration, Frame,
    FrameTruth, NoiseConfig, TaskConfig, DEMO_SCHEMA_VERSION,
};
pub use detect::{
    select_object_of_interest, select_with_rule, Detection, Label, ObjectOfInterest,
    SelectionRule, CONFIDENCE_THRESHOLD, NEAR_RADIUS,
};
pub use scene::{
    step_towards, Aabb, DetectionModel, Layout, Phase, SceneObject, SceneState, StepEvents, Task,
};

use thiserror::Error;

use crate::Vec3;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("invalid depth {0} mm (must be positive)")]
    InvalidDepth(f64),
    #[error("point {0:?} is behind the camera")]
    BehindCamera(Vec3),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("demonstration generation failed: {0}")]
    Generation(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
