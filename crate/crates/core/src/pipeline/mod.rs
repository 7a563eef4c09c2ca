//! End-to-end orchestration: run configuration, stage commands that
//! communicate through files under the output directory, and a manifest of
//! per-stage file digests.

mod config;
mod manifest;
mod stages;

pub use config::{init_config, DemoCounts, EvalStage, FkStage, HumanIkStage, IrlStage, RunConfig, Seeds, CONFIG_FILE};
pub use manifest::{RunManifest, StageRecord, MANIFEST_FILE};
pub use stages::{
    eval, gen_demos, layout, load_demos, plan_baseline, report, run_pipeline, train_all, train_irl, EpisodeRecord, EvalSummary, MethodMetrics,
    StageOutput, TrainIrlOverrides,
};

use thiserror::Error;

/// Errors carry the process exit code they map to.
#[derive(Debug, Error)]
pub enum PipelineError {
    /// Bad or missing configuration, inputs or prerequisite artifacts.
    #[error("{0}")]
    Validation(String),
    /// A stage ran and failed.
    #[error("{0}")]
    Runtime(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Validation(_) => 2,
            PipelineError::Runtime(_) => 3,
        }
    }
}

impl From<std::io::Error> for PipelineError {
    fn from(e: std::io::Error) -> Self {
        PipelineError::Runtime(e.to_string())
    }
}

macro_rules! runtime_from {
    ($($t:ty),*) => {$(
        impl From<$t> for PipelineError {
            fn from(e: $t) -> Self {
                PipelineError::Runtime(e.to_string())
            }
        }
    )*};
}

runtime_from!(
    crate::world::WorldError,
    crate::nn::NnError,
    crate::perception::PerceptionError,
    crate::retarget::RetargetError,
    crate::planners::PlanError,
    crate::irl::IrlError,
    crate::metrics::MetricsError,
    crate::kinematics::KinematicsError,
    serde_json::Error,
    csv::Error
);
