//! Wrist positions to cobot joint angles: a learned human pose model, an
//! affine human-to-cobot joint map, a learned restricted forward model and
//! a penalized gradient refiner running through it.

mod chain;
mod ik;
mod joint_map;
mod learned;

pub use chain::{records, write_retarget_jsonl, write_retarget_summary, FrameResult, RetargetConfig, RetargetHeader, RetargetRecord, Retargeter};
pub use ik::{cobot_ik_refine, IkOptConfig, IkResult};
pub use joint_map::{symbolic_map, JointMapEntry, SymbolicJointMap, HUMAN_REST};
pub use learned::{
    human_ik_samples, human_ik_spec, restricted_fk_samples, restricted_fk_spec, train_human_ik, train_restricted_fk, HumanIk, HumanIkOutput,
    LearnedModelConfig, RestrictedFk, MIN_FK_SAMPLES,
};

use thiserror::Error;

use crate::kinematics::KinematicsError;
use crate::nn::NnError;
use crate::perception::PerceptionError;

#[derive(Debug, Error)]
pub enum RetargetError {
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("IK objective became non-finite at iteration {iter}")]
    NonFiniteLoss { iter: u64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("wrong architecture: {0}")]
    Architecture(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<PerceptionError> for RetargetError {
    fn from(e: PerceptionError) -> Self {
        match e {
            PerceptionError::Nn(n) => RetargetError::Nn(n),
            PerceptionError::InsufficientData(s) => RetargetError::InsufficientData(s),
            other => RetargetError::InvalidConfig(other.to_string()),
        }
    }
}
