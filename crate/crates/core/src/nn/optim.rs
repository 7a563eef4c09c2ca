use serde::{Deserialize, Serialize};

use super::NnError;

/// Optimizer and schedule settings shared by every trained component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub decay_factor: f64,
    pub decay_interval: u64,
    pub clip_norm: Option<f64>,
    pub batch_size: usize,
    pub max_steps: u64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            decay_factor: 0.9,
            decay_interval: 1000,
            clip_norm: Some(1.0),
            batch_size: 32,
            max_steps: 5000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |m: &str| Err(NnError::InvalidConfig(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return bad("decay_factor must be in (0, 1]");
        }
        if self.decay_interval == 0 {
            return bad("decay_interval must be positive");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        if matches!(self.clip_norm, Some(c) if !(c > 0.0)) {
            return bad("clip_norm must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        Ok(())
    }
}

/// Step-decay schedule: `base * factor^floor(step / interval)`.
pub fn lr_at(step: u64, base: f64, factor: f64, interval: u64) -> f64 {
    base * factor.powi((step / interval.max(1)) as i32)
}

pub fn global_norm(grad: &[f64]) -> f64 {
    grad.iter().map(|g| g * g).sum::<f64>().sqrt()
}

/// Rescales `grad` in place so its L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = global_norm(grad);
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of `params`.
pub fn adam_step(
    params: &mut [f64],
    grad: &[f64],
    state: &mut AdamState,
    lr: f64,
) -> Result<(), NnError> {
    if params.len() != grad.len() || state.m.len() != params.len() {
        return Err(NnError::Shape(vec![params.len()], vec![grad.len()]));
    }
    state.t += 1;
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(NnError::NonFiniteGradient { step: state.t });
    }
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    for k in 0..params.len() {
        state.m[k] = b1 * state.m[k] + (1.0 - b1) * grad[k];
        state.v[k] = b2 * state.v[k] + (1.0 - b2) * grad[k] * grad[k];
        let mh = state.m[k] / c1;
        let vh = state.v[k] / c2;
        params[k] -= lr * mh / (vh.sqrt() + state.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn schedule_values() {
        assert!((lr_at(0, 0.01, 0.9, 1000) - 0.01).abs() < 1e-15);
        assert!((lr_at(999, 0.01, 0.9, 1000) - 0.01).abs() < 1e-15);
        assert!((lr_at(1000, 0.01, 0.9, 1000) - 0.009).abs() < 1e-15);
        assert!((lr_at(2500, 0.01, 0.9, 1000) - 0.0081).abs() < 1e-15);
    }

    #[test]
    fn clip_three_four_five() {
        let mut g = vec![3.0, 4.0];
        let n = clip_grad_norm(&mut g, 1.0);
        assert_eq!(n, 5.0);
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
        let mut small = vec![0.1, 0.1];
        clip_grad_norm(&mut small, 1.0);
        assert_eq!(small, vec![0.1, 0.1]);
    }

    proptest! {
        #[test]
        fn clip_bounds_norm_and_is_idempotent(g in prop::collection::vec(-100.0f64..100.0, 1..20), c in 0.01f64..10.0) {
            let mut a = g.clone();
            clip_grad_norm(&mut a, c);
            prop_assert!(global_norm(&a) <= c * (1.0 + 1e-12));
            let mut b = a.clone();
            clip_grad_norm(&mut b, c);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn first_adam_step_moves_by_lr_against_sign() {
        let mut p = vec![1.0, 1.0, 1.0];
        let mut s = AdamState::new(3);
        adam_step(&mut p, &[2.0, -0.5, 1e3], &mut s, 0.01).unwrap();
        assert!((p[0] - 0.99).abs() < 1e-9);
        assert!((p[1] - 1.01).abs() < 1e-9);
        assert!((p[2] - 0.99).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_only_decays_moments() {
        let mut p = vec![1.0, -2.0];
        let mut s = AdamState::new(2);
        s.m = vec![0.5, 0.5];
        s.v = vec![0.25, 0.25];
        s.t = 3;
        let before = p.clone();
        adam_step(&mut p, &[0.0, 0.0], &mut s, 0.0).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.m, vec![0.45, 0.45]);
        assert!((s.v[0] - 0.24975).abs() < 1e-15);
        assert_eq!(s.t, 4);
    }

    /// Independent scalar Adam recurrence, used as the oracle below.
    fn scalar_adam(w0: f64, lr: f64, steps: usize) -> Vec<f64> {
        let (mut w, mut m, mut v) = (w0, 0.0f64, 0.0f64);
        let mut out = vec![w];
        for t in 1..=steps {
            let g = 2.0 * (w - 3.0);
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t as i32));
            let vh = v / (1.0 - 0.999f64.powi(t as i32));
            w -= lr * mh / (vh.sqrt() + 1e-8);
            out.push(w);
        }
        out
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let oracle = scalar_adam(0.0, 0.1, 100);
        let mut w = vec![0.0];
        let mut s = AdamState::new(1);
        let mut trace = vec![0.0];
        for _ in 0..100 {
            let g = vec![2.0 * (w[0] - 3.0)];
            adam_step(&mut w, &g, &mut s, 0.1).unwrap();
            trace.push(w[0]);
        }
        for (a, b) in trace.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
        // Monotone while approaching; Adam at this rate then oscillates
        // around the optimum with a shrinking envelope.
        let dist: Vec<f64> = trace.iter().step_by(10).map(|w| (w - 3.0).abs()).collect();
        for pair in dist[..5].windows(2) {
            assert!(pair[1] < pair[0], "{dist:?}");
        }
        assert!(trace[90..].iter().all(|w| (w - 3.0).abs() < 0.03));
    }

    #[test]
    fn adam_rejects_non_finite() {
        let mut p = vec![0.0];
        let mut s = AdamState::new(1);
        assert!(matches!(
            adam_step(&mut p, &[f64::NAN], &mut s, 0.1),
            Err(NnError::NonFiniteGradient { step: 1 })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let c = TrainConfig { learning_rate: 0.0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = TrainConfig { batch_size: 0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = TrainConfig { clip_norm: None, ..Default::default() };
        assert!(c.validate().is_ok());
        let c = TrainConfig { clip_norm: Some(-1.0), ..Default::default() };
        assert!(c.validate().is_err());
    }
}
