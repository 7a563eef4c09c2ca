use std::f64::consts::{E, PI};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{IrlError, OBS_DIM};
use crate::nn::{Checkpoint, ForwardCache, Model, ModelSpec, NnError, TrainingMeta};
use crate::Vec3;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 1.0;

/// Diagonal Gaussian over 3-D actions. The mean is `max_step * tanh(net(s))`
/// so it always respects the step limit; the log standard deviations are
/// state-independent parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub net: Model,
    pub log_std: [f64; 3],
    pub max_step: f64,
}

/// Per-sample pieces needed to back-propagate through the mean.
pub(crate) struct MeanPass {
    pub means: Vec<Vec3>,
    pub tanh: Vec<[f64; 3]>,
    pub cache: ForwardCache,
}

impl GaussianPolicy {
    pub fn new(hidden: &[usize], log_std: f64, max_step: f64, seed: u64) -> Result<Self, IrlError> {
        let spec = ModelSpec::stacked(OBS_DIM, &[], hidden, 3, seed)?;
        let mut p = GaussianPolicy {
            net: Model::new(spec)?,
            log_std: [0.0; 3],
            max_step,
        };
        p.set_log_std([log_std; 3]);
        Ok(p)
    }

    pub fn set_log_std(&mut self, v: [f64; 3]) {
        self.log_std = v.map(|s| s.clamp(LOG_STD_MIN, LOG_STD_MAX));
    }

    pub fn std(&self) -> [f64; 3] {
        self.log_std.map(f64::exp)
    }

    pub fn mean_action(&self, obs: &[f64]) -> Result<Vec3, IrlError> {
        let z = self.net.predict(obs)?;
        Ok(Vec3::from_fn(|i, _| self.max_step * z[i].tanh()))
    }

    pub(crate) fn mean_pass(&self, obs: &[Vec<f64>]) -> Result<MeanPass, IrlError> {
        let (z, cache) = self.net.forward_sequence(obs)?;
        let tanh: Vec<[f64; 3]> = z.iter().map(|z| [z[0].tanh(), z[1].tanh(), z[2].tanh()]).collect();
        let means = tanh.iter().map(|t| Vec3::from_fn(|i, _| self.max_step * t[i])).collect();
        Ok(MeanPass { means, tanh, cache })
    }

    /// Log density of `a` under N(mean, diag(std^2)).
    pub fn log_prob_with_mean(&self, mean: &Vec3, a: &Vec3) -> f64 {
        (0..3)
            .map(|k| {
                let s = self.log_std[k].exp();
                let u = (a[k] - mean[k]) / s;
                -0.5 * u * u - self.log_std[k] - 0.5 * (2.0 * PI).ln()
            })
            .sum()
    }

    pub fn log_prob(&self, obs: &[f64], a: &Vec3) -> Result<f64, IrlError> {
        Ok(self.log_prob_with_mean(&self.mean_action(obs)?, a))
    }

    /// Draws an action, clips it to the step limit and returns it with its
    /// log density (evaluated at the clipped action).
    pub fn sample<R: Rng>(&self, obs: &[f64], rng: &mut R) -> Result<(Vec3, f64), IrlError> {
        let mean = self.mean_action(obs)?;
        let std = self.std();
        let a = Vec3::from_fn(|k, _| {
            let e: f64 = StandardNormal.sample(rng);
            (mean[k] + std[k] * e).clamp(-self.max_step, self.max_step)
        });
        Ok((a, self.log_prob_with_mean(&mean, &a)))
    }

    /// Differential entropy, sum over axes of `log_std + ln(2 pi e) / 2`.
    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|s| s + 0.5 * (2.0 * PI * E).ln()).sum()
    }

    /// Converts gradients with respect to the means into gradients with
    /// respect to the network outputs.
    pub(crate) fn mean_to_output_grads(&self, pass: &MeanPass, mean_grads: &[Vec3]) -> Vec<Vec<f64>> {
        pass.tanh
            .iter()
            .zip(mean_grads)
            .map(|(t, g)| (0..3).map(|k| g[k] * self.max_step * (1.0 - t[k] * t[k])).collect())
            .collect()
    }

    pub fn to_checkpoint(&self, meta: TrainingMeta) -> Checkpoint {
        Checkpoint::new(&self.net, meta)
            .with_extra("log_std", self.log_std.to_vec())
            .with_extra("max_step", vec![self.max_step])
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, IrlError> {
        let net = ck.model()?;
        if net.spec().input_dim() != OBS_DIM || net.spec().output_dim() != 3 {
            return Err(NnError::InvalidSpec("policy network must map the encoded state to 3 outputs".into()).into());
        }
        let ls = ck.extra("log_std")?;
        let ms = ck.extra("max_step")?;
        if ls.len() != 3 || ms.len() != 1 {
            return Err(NnError::Checkpoint("malformed policy extras".into()).into());
        }
        let mut p = GaussianPolicy {
            net,
            log_std: [0.0; 3],
            max_step: ms[0],
        };
        p.set_log_std([ls[0], ls[1], ls[2]]);
        Ok(p)
    }
}

/// The advantage approximator f(s, a), fed the encoded state and the action
/// in units of the step limit.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageModel {
    pub net: Model,
    pub max_step: f64,
}

impl AdvantageModel {
    pub fn new(hidden: &[usize], max_step: f64, seed: u64) -> Result<Self, IrlError> {
        let spec = ModelSpec::stacked(OBS_DIM + 3, &[], hidden, 1, seed)?;
        Ok(AdvantageModel {
            net: Model::new(spec)?,
            max_step,
        })
    }

    pub fn input(&self, obs: &[f64], a: &Vec3) -> Vec<f64> {
        let mut x = obs.to_vec();
        x.extend(a.iter().map(|v| v / self.max_step));
        x
    }

    pub fn value(&self, obs: &[f64], a: &Vec3) -> Result<f64, IrlError> {
        Ok(self.net.predict(&self.input(obs, a))?[0])
    }

    /// D(s, a) for the given policy.
    pub fn discriminator(&self, policy: &GaussianPolicy, obs: &[f64], a: &Vec3) -> Result<f64, IrlError> {
        Ok(discriminator_prob(self.value(obs, a)?, policy.log_prob(obs, a)?))
    }

    /// Recovered reward `f(s, a) - log pi(a|s)`.
    pub fn reward(&self, policy: &GaussianPolicy, obs: &[f64], a: &Vec3) -> Result<f64, IrlError> {
        Ok(self.value(obs, a)? - policy.log_prob(obs, a)?)
    }

    pub fn to_checkpoint(&self, meta: TrainingMeta) -> Checkpoint {
        Checkpoint::new(&self.net, meta).with_extra("max_step", vec![self.max_step])
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, IrlError> {
        let net = ck.model()?;
        if net.spec().input_dim() != OBS_DIM + 3 || net.spec().output_dim() != 1 {
            return Err(NnError::InvalidSpec("advantage network must map state and action to 1 output".into()).into());
        }
        let ms = ck.extra("max_step")?;
        if ms.len() != 1 {
            return Err(NnError::Checkpoint("malformed advantage extras".into()).into());
        }
        Ok(AdvantageModel { net, max_step: ms[0] })
    }
}

/// `exp(f) / (exp(f) + pi)`, evaluated as a sigmoid of `f - log pi`.
pub fn discriminator_prob(f: f64, log_pi: f64) -> f64 {
    let x = f - log_pi;
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log D - log(1 - D)`.
pub fn reward_from_disc(d: f64) -> f64 {
    d.ln() - (-d).ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn discriminator_examples() {
        assert_eq!(discriminator_prob(-1.3, -1.3), 0.5);
        assert!(discriminator_prob(800.0, 0.0) > 1.0 - 1e-12);
        assert!(discriminator_prob(-800.0, 0.0) >= 0.0);
        assert_eq!(reward_from_disc(0.5), 0.0);
        assert!((reward_from_disc(E / (1.0 + E)) - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn discriminator_matches_direct_formula(f in -8.0f64..8.0, lp in -8.0f64..8.0) {
            let direct = f.exp() / (f.exp() + lp.exp());
            prop_assert!((discriminator_prob(f, lp) - direct).abs() < 1e-12);
        }

        #[test]
        fn reward_is_f_minus_log_pi(f in -5.0f64..5.0, lp in -5.0f64..5.0) {
            let d = discriminator_prob(f, lp);
            prop_assert!(d > 0.0 && d < 1.0);
            prop_assert!((reward_from_disc(d) - (f - lp)).abs() < 1e-10);
        }
    }

    #[test]
    fn log_prob_matches_density() {
        let mut p = GaussianPolicy::new(&[8], -2.0, 0.05, 3).unwrap();
        p.set_log_std([-2.0, -3.0, -1.0]);
        let obs = vec![0.1; OBS_DIM];
        let mean = p.mean_action(&obs).unwrap();
        let a = mean + Vec3::new(0.01, -0.02, 0.005);
        let mut dens = 1.0;
        for k in 0..3 {
            let s = p.log_std[k].exp();
            dens *= (-(a[k] - mean[k]).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt());
        }
        assert!((p.log_prob(&obs, &a).unwrap() - dens.ln()).abs() < 1e-10);
    }

    #[test]
    fn samples_respect_step_limit() {
        let mut p = GaussianPolicy::new(&[8], 1.0, 0.05, 3).unwrap();
        p.set_log_std([5.0; 3]);
        assert_eq!(p.log_std, [LOG_STD_MAX; 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let (a, lp) = p.sample(&[0.0; OBS_DIM], &mut rng).unwrap();
            assert!(a.amax() <= 0.05);
            assert!((lp - p.log_prob(&[0.0; OBS_DIM], &a).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_entropy_point() {
        let mut p = GaussianPolicy::new(&[4], 0.0, 0.05, 0).unwrap();
        p.set_log_std([-0.5 * (2.0 * PI * E).ln(); 3]);
        assert!(p.entropy().abs() < 1e-12);
    }

    #[test]
    fn checkpoints_round_trip() {
        let meta = TrainingMeta {
            steps: 1,
            final_loss: 0.0,
            config: Default::default(),
        };
        let p = GaussianPolicy::new(&[8, 8], -3.0, 0.05, 2).unwrap();
        assert_eq!(GaussianPolicy::from_checkpoint(&p.to_checkpoint(meta.clone())).unwrap(), p);
        let f = AdvantageModel::new(&[8], 0.05, 2).unwrap();
        assert_eq!(AdvantageModel::from_checkpoint(&f.to_checkpoint(meta)).unwrap(), f);
    }
}
