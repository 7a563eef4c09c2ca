use serde::{Deserialize, Serialize};

use super::{RestrictedFk, RetargetError};
use crate::kinematics::RobotSpec;
use crate::nn::{adam_step, clip_grad_norm, lr_at, AdamState};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IkOptConfig {
    /// Weight of the adjustment penalty `alpha * |q - q0|`.
    pub alpha: f64,
    pub lr: f64,
    pub max_iters: u64,
    pub decay_factor: f64,
    pub decay_interval: u64,
    /// Metres.
    pub pos_threshold: f64,
    pub clip_norm: f64,
    /// Use `alpha * |q - q0|^2` instead of the plain norm.
    pub squared_penalty: bool,
}

impl Default for IkOptConfig {
    fn default() -> Self {
        IkOptConfig {
            alpha: 0.0005,
            lr: 0.01,
            max_iters: 10_000,
            decay_factor: 0.9,
            decay_interval: 1000,
            pos_threshold: 0.01,
            clip_norm: 1.0,
            squared_penalty: false,
        }
    }
}

impl IkOptConfig {
    pub fn validate(&self) -> Result<(), RetargetError> {
        let ok = self.alpha >= 0.0
            && self.lr > 0.0
            && self.max_iters > 0
            && self.decay_factor > 0.0
            && self.decay_factor <= 1.0
            && self.decay_interval > 0
            && self.pos_threshold > 0.0
            && self.clip_norm > 0.0;
        if ok {
            Ok(())
        } else {
            Err(RetargetError::InvalidConfig(format!("invalid IK settings: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkResult {
    pub q: [f64; 4],
    /// Distance from the learned FK of `q` to the target, metres.
    pub final_error: f64,
    pub iters: u64,
    pub converged: bool,
    /// Objective value before each Adam step.
    pub loss_trace: Vec<f64>,
}

fn penalty(q: &[f64; 4], q0: &[f64; 4], cfg: &IkOptConfig) -> (f64, [f64; 4]) {
    let d: [f64; 4] = [0, 1, 2, 3].map(|k| q[k] - q0[k]);
    let n = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    if cfg.squared_penalty {
        (cfg.alpha * n * n, d.map(|v| 2.0 * cfg.alpha * v))
    } else if n > 0.0 {
        (cfg.alpha * n, d.map(|v| cfg.alpha * v / n))
    } else {
        (0.0, [0.0; 4])
    }
}

/// Minimizes `|fk(q) - target| + alpha * |q - q0|` with Adam through the
/// learned FK, clamping to the joint limits after every step. Stops as soon
/// as the position error drops below the threshold.
pub fn cobot_ik_refine(fk: &RestrictedFk, robot: &RobotSpec, q0: &[f64; 4], target: Vec3, cfg: &IkOptConfig) -> Result<IkResult, RetargetError> {
    cfg.validate()?;
    if target.iter().any(|v| !v.is_finite()) {
        return Err(RetargetError::NonFinite("target"));
    }
    for (k, (v, (lo, hi))) in q0.iter().zip(robot.mapped_limits()).enumerate() {
        if !(*v >= lo - 1e-12 && *v <= hi + 1e-12) {
            return Err(RetargetError::InvalidConfig(format!("q0[{k}] = {v} is outside [{lo}, {hi}]")));
        }
    }
    let mut q = *q0;
    robot.clamp_mapped(&mut q);
    let mut adam = AdamState::new(4);
    let mut trace = Vec::new();
    for it in 0..cfg.max_iters {
        let p = fk.predict(&q)?;
        let e = p - target;
        let err = e.norm();
        if err < cfg.pos_threshold {
            return Ok(IkResult {
                q,
                final_error: err,
                iters: it,
                converged: true,
                loss_trace: trace,
            });
        }
        let (pen, pen_grad) = penalty(&q, q0, cfg);
        let loss = err + pen;
        if !loss.is_finite() {
            return Err(RetargetError::NonFiniteLoss { iter: it });
        }
        trace.push(loss);
        let (_, g_pos) = fk.predict_with_gradient(&q, &(e / err))?;
        let mut g: Vec<f64> = (0..4).map(|k| g_pos[k] + pen_grad[k]).collect();
        clip_grad_norm(&mut g, cfg.clip_norm);
        let lr = lr_at(it, cfg.lr, cfg.decay_factor, cfg.decay_interval);
        adam_step(&mut q, &g, &mut adam, lr).map_err(|_| RetargetError::NonFiniteLoss { iter: it })?;
        robot.clamp_mapped(&mut q);
    }
    let final_error = (fk.predict(&q)? - target).norm();
    Ok(IkResult {
        q,
        final_error,
        iters: cfg.max_iters,
        converged: final_error < cfg.pos_threshold,
        loss_trace: trace,
    })
}
