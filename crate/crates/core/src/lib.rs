//! Learning human-like cobot manipulation from synthetic demonstrations.

// Validation uses `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod io;
pub mod irl;
pub mod kinematics;
pub mod metrics;
pub mod nn;
pub mod perception;
pub mod pipeline;
pub mod planners;
pub mod retarget;
pub mod world;

/// World-frame 3-vector in metres.
pub type Vec3 = nalgebra::Vector3<f64>;
