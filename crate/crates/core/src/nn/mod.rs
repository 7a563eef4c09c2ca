//! A small trainable-network engine: dense and LSTM layers, MSE loss,
//! reverse-mode gradients (including gradients with respect to the input),
//! Adam, global-norm clipping and step-decay schedules.
//!
//! Models are a flat parameter vector plus a [`ModelSpec`]; gradients are a
//! flat vector with the same layout, which keeps the optimizer and the
//! clipping code independent of the architecture.

mod checkpoint;
mod error;
mod loss;
mod model;
mod optim;
mod scale;
mod scaled;
mod tensor;
mod train;

pub use checkpoint::{Checkpoint, TrainingMeta, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use error::NnError;
pub use loss::mse_loss;
pub use model::{
    Activation, ForwardCache, Gradients, LayerKind, LayerSpec, Model, ModelSpec, RecurrentState,
};
pub use optim::{adam_step, clip_grad_norm, global_norm, lr_at, AdamState, TrainConfig};
pub use scale::Standardizer;
pub use scaled::ScaledModel;
pub use tensor::Tensor;
pub use train::{batch_gradient, fit, SequenceSample, TrainOutcome};
