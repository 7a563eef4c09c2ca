//! Adversarial inverse reinforcement learning on the sorting task: a
//! deterministic MDP over the synthetic scene, a Gaussian policy, an
//! advantage network forming the discriminator, and policy optimization on
//! the recovered reward.

mod airl;
mod policy;

pub use airl::{
    behavior_clone, entropy_regularized_return, evaluate_lba, expert_pairs, rollout, train_airl, write_history_csv, AirlConfig, AirlOutcome,
    ExpertPair, HistoryRow, Trajectory,
};
pub use policy::{discriminator_prob, reward_from_disc, AdvantageModel, GaussianPolicy, LOG_STD_MAX, LOG_STD_MIN};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::NnError;
use crate::world::{Aabb, Frame, Label, SceneState, Task, TaskConfig, WorldError};
use crate::Vec3;

/// Encoded length: eef (3), object location (3), object offset from the
/// end-effector (3), one-hot label (5).
pub const OBS_DIM: usize = 14;
/// Length scale of the encoded object offset, metres.
pub const OFFSET_SCALE: f64 = 0.1;
/// Encoded object slot when no object qualifies (outside the [-1, 1] range
/// of real positions).
pub const NO_OBJECT: f64 = -2.0;

#[derive(Debug, Error)]
pub enum IrlError {
    #[error("action {action:?} exceeds the per-step limit {max_step}")]
    OversizedAction { action: [f64; 3], max_step: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("non-finite value during training at iteration {0}")]
    NonFinite(usize),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// What the policy sees: end-effector, object-of-interest location and label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub eef: Vec3,
    #[serde(with = "crate::io::sentinel_vec3")]
    pub obj_loc: Vec3,
    pub label: Label,
}

impl Observation {
    pub fn from_frame(f: &Frame) -> Self {
        Observation {
            eef: f.eef,
            obj_loc: f.object_of_interest.location,
            label: f.object_of_interest.label,
        }
    }

    pub fn has_object(&self) -> bool {
        self.obj_loc.iter().all(|v| v.is_finite())
    }

    /// Workspace-normalized positions, the object's offset from the
    /// end-effector in units of [`OFFSET_SCALE`] (zero without an object)
    /// and a one-hot label.
    pub fn encode(&self, workspace: &Aabb) -> Vec<f64> {
        let mut x = Vec::with_capacity(OBS_DIM);
        x.extend_from_slice(workspace.normalize(&self.eef).as_slice());
        if self.has_object() {
            x.extend_from_slice(workspace.normalize(&self.obj_loc).as_slice());
            x.extend(((self.obj_loc - self.eef) / OFFSET_SCALE).iter());
        } else {
            x.extend_from_slice(&[NO_OBJECT; 3]);
            x.extend_from_slice(&[0.0; 3]);
        }
        x.extend_from_slice(&self.label.one_hot());
        x
    }
}

/// The sorting task as an MDP: deterministic transitions, random initial
/// scenes, discount `gamma`, episodes capped at `horizon` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SortingMdp {
    pub task: TaskConfig,
    pub gamma: f64,
    pub horizon: usize,
}

impl Default for SortingMdp {
    fn default() -> Self {
        SortingMdp {
            task: TaskConfig::default(),
            gamma: 0.99,
            horizon: 35,
        }
    }
}

impl SortingMdp {
    pub fn validate(&self) -> Result<(), IrlError> {
        self.task.validate()?;
        if self.task.task != Task::Sorting {
            return Err(IrlError::InvalidConfig("the IRL MDP models the sorting task".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) || self.horizon == 0 {
            return Err(IrlError::InvalidConfig("need 0 <= gamma < 1 and horizon >= 1".into()));
        }
        Ok(())
    }

    pub fn max_step(&self) -> f64 {
        self.task.layout.max_step
    }

    pub fn workspace(&self) -> &Aabb {
        &self.task.layout.workspace
    }

    /// Draws an initial scene.
    pub fn reset<R: Rng>(&self, rng: &mut R) -> Result<SceneState, IrlError> {
        let t = &self.task;
        Ok(SceneState::random(t.task, &t.layout, t.objects_per_episode, t.blemish_visible_prob, rng)?)
    }

    pub fn observe(&self, s: &SceneState) -> Observation {
        let (ooi, _) = s.ideal_object_of_interest();
        Observation {
            eef: s.eef,
            obj_loc: ooi.location,
            label: ooi.label,
        }
    }

    pub fn step(&self, s: &SceneState, a: Vec3) -> Result<SceneState, IrlError> {
        if a.iter().any(|v| !v.is_finite()) || a.amax() > self.max_step() + 1e-12 {
            return Err(IrlError::OversizedAction {
                action: [a.x, a.y, a.z],
                max_step: self.max_step(),
            });
        }
        let mut next = s.clone();
        next.apply(a, &self.task.layout, self.task.dt);
        Ok(next)
    }
}

/// Free-function form of [`SortingMdp::step`].
pub fn mdp_step(mdp: &SortingMdp, s: &SceneState, a: Vec3) -> Result<SceneState, IrlError> {
    mdp.step(s, a)
}
