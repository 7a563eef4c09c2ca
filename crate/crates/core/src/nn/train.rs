use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{adam_step, clip_grad_norm, lr_at, AdamState, Model, NnError, TrainConfig};

/// One training sequence. Steps whose target is `None` contribute no loss
/// but still drive the recurrent state.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSample {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Option<Vec<f64>>>,
}

impl SequenceSample {
    /// A single input/target pair, for feed-forward models.
    pub fn single(input: Vec<f64>, target: Vec<f64>) -> Self {
        SequenceSample {
            inputs: vec![input],
            targets: vec![Some(target)],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub steps: u64,
    /// Mean minibatch loss over the last epoch-sized window.
    pub final_loss: f64,
    pub loss_history: Vec<f64>,
}

/// Mean squared error over every present target element of `batch`, and its
/// gradient with respect to the model parameters.
pub fn batch_gradient(model: &Model, batch: &[&SequenceSample]) -> Result<(f64, Vec<f64>), NnError> {
    let out_dim = model.spec().output_dim();
    let count: usize = batch
        .iter()
        .flat_map(|s| s.targets.iter())
        .flatten()
        .map(|t| t.len())
        .sum();
    if count == 0 {
        return Err(NnError::InsufficientData("batch has no targets".into()));
    }
    let n = count as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; model.param_count()];
    for s in batch {
        if s.inputs.len() != s.targets.len() {
            return Err(NnError::Shape(vec![s.inputs.len()], vec![s.targets.len()]));
        }
        let (pred, cache) = model.forward_sequence(&s.inputs)?;
        let mut up = Vec::with_capacity(pred.len());
        for (p, t) in pred.iter().zip(&s.targets) {
            match t {
                Some(t) => {
                    if t.len() != out_dim {
                        return Err(NnError::Shape(vec![out_dim], vec![t.len()]));
                    }
                    let mut g = vec![0.0; out_dim];
                    for k in 0..out_dim {
                        let d = p[k] - t[k];
                        loss += d * d / n;
                        g[k] = 2.0 * d / n;
                    }
                    up.push(g);
                }
                None => up.push(vec![0.0; out_dim]),
            }
        }
        let g = model.backward(&cache, &up)?;
        grad.iter_mut().zip(&g.params).for_each(|(a, b)| *a += b);
    }
    Ok((loss, grad))
}

/// Minibatch Adam with global-norm clipping and step decay. Samples are
/// reshuffled every epoch from `config.seed`.
pub fn fit(model: &mut Model, samples: &[SequenceSample], config: &TrainConfig) -> Result<TrainOutcome, NnError> {
    config.validate()?;
    if samples.is_empty() {
        return Err(NnError::InsufficientData("no training samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = AdamState::new(model.param_count());
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(config.max_steps as usize);
    let mut step = 0u64;
    let mut cursor = order.len();
    let mut skipped = 0usize;
    while step < config.max_steps {
        if cursor >= order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let end = (cursor + config.batch_size).min(order.len());
        let batch: Vec<&SequenceSample> = order[cursor..end].iter().map(|&i| &samples[i]).collect();
        cursor = end;
        let (loss, mut grad) = match batch_gradient(model, &batch) {
            Err(NnError::InsufficientData(_)) => {
                skipped += batch.len();
                if skipped >= samples.len() && history.is_empty() {
                    break;
                }
                continue;
            }
            other => other?,
        };
        if let Some(c) = config.clip_norm {
            clip_grad_norm(&mut grad, c);
        }
        let lr = lr_at(step, config.learning_rate, config.decay_factor, config.decay_interval);
        adam_step(model.params_mut(), &grad, &mut adam, lr)
            .map_err(|_| NnError::NonFiniteGradient { step: step + 1 })?;
        history.push(loss);
        step += 1;
    }
    if history.is_empty() {
        return Err(NnError::InsufficientData("no sample carries a target".into()));
    }
    let window = samples.len().div_ceil(config.batch_size).clamp(1, history.len());
    let final_loss = history[history.len() - window..].iter().sum::<f64>() / window as f64;
    Ok(TrainOutcome {
        steps: step,
        final_loss,
        loss_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, LayerSpec, ModelSpec};

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    fn finite_difference_check(model: &Model, sample: &SequenceSample) {
        let (_, g) = batch_gradient(model, &[sample]).unwrap();
        use rand::Rng;
        let h = 1e-5;
        let mut m = model.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let k = rng.gen_range(0..model.param_count());
            let orig = m.params()[k];
            m.params_mut()[k] = orig + h;
            let lp = batch_gradient(&m, &[sample]).unwrap().0;
            m.params_mut()[k] = orig - h;
            let lm = batch_gradient(&m, &[sample]).unwrap().0;
            m.params_mut()[k] = orig;
            let fd = (lp - lm) / (2.0 * h);
            assert!(rel_err(fd, g[k]) < 1e-4, "param {k}: fd {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn dense_gradients_match_finite_differences() {
        let m = Model::new(ModelSpec::stacked(3, &[], &[7, 5], 2, 4).unwrap()).unwrap();
        let s = SequenceSample::single(vec![0.4, -0.7, 1.1], vec![0.2, -0.3]);
        finite_difference_check(&m, &s);
    }

    #[test]
    fn recurrent_gradients_match_finite_differences() {
        let m = Model::new(ModelSpec::stacked(3, &[4, 3], &[5], 2, 8).unwrap()).unwrap();
        let s = SequenceSample {
            inputs: vec![
                vec![0.1, 0.2, -0.3],
                vec![0.5, -0.1, 0.0],
                vec![-0.4, 0.3, 0.9],
                vec![0.2, 0.2, 0.2],
            ],
            targets: vec![None, Some(vec![0.3, -0.2]), None, Some(vec![-0.5, 0.1])],
        };
        finite_difference_check(&m, &s);
    }

    #[test]
    fn input_gradients_match_finite_differences() {
        let m = Model::new(ModelSpec::stacked(3, &[], &[6], 1, 2).unwrap()).unwrap();
        let x = vec![0.3, -0.2, 0.8];
        let (_, cache) = m.forward_sequence(std::slice::from_ref(&x)).unwrap();
        let g = m.backward(&cache, &[vec![1.0]]).unwrap();
        let h = 1e-6;
        for k in 0..3 {
            let mut a = x.clone();
            let mut b = x.clone();
            a[k] += h;
            b[k] -= h;
            let fd = (m.predict(&a).unwrap()[0] - m.predict(&b).unwrap()[0]) / (2.0 * h);
            assert!(rel_err(fd, g.inputs[0][k]) < 1e-5);
        }
    }

    #[test]
    fn linear_regression_converges() {
        let spec = ModelSpec::new(vec![LayerSpec::dense(2, 1, Activation::Linear)], 1).unwrap();
        let mut m = Model::new(spec).unwrap();
        let samples: Vec<SequenceSample> = (0..64)
            .map(|i| {
                let a = (i as f64 / 64.0) * 2.0 - 1.0;
                let b = ((i * 37 % 64) as f64 / 64.0) * 2.0 - 1.0;
                SequenceSample::single(vec![a, b], vec![2.0 * a - 0.5 * b + 0.3])
            })
            .collect();
        let cfg = TrainConfig {
            learning_rate: 0.01,
            max_steps: 5000,
            batch_size: 16,
            ..Default::default()
        };
        let out = fit(&mut m, &samples, &cfg).unwrap();
        assert!(out.final_loss < 1e-4, "final loss {}", out.final_loss);
        assert_eq!(out.steps, 5000);
    }

    #[test]
    fn training_is_deterministic() {
        let samples: Vec<SequenceSample> = (0..20)
            .map(|i| SequenceSample::single(vec![i as f64 / 20.0], vec![(i as f64 / 3.0).sin()]))
            .collect();
        let cfg = TrainConfig {
            max_steps: 50,
            batch_size: 4,
            seed: 9,
            ..Default::default()
        };
        let spec = ModelSpec::stacked(1, &[], &[8], 1, 3).unwrap();
        let mut a = Model::new(spec.clone()).unwrap();
        let mut b = Model::new(spec).unwrap();
        let oa = fit(&mut a, &samples, &cfg).unwrap();
        let ob = fit(&mut b, &samples, &cfg).unwrap();
        assert_eq!(a.params(), b.params());
        assert_eq!(oa, ob);
    }

    #[test]
    fn rejects_target_free_data() {
        let mut m = Model::new(ModelSpec::stacked(1, &[], &[], 1, 0).unwrap()).unwrap();
        let s = SequenceSample {
            inputs: vec![vec![0.0]],
            targets: vec![None],
        };
        assert!(fit(&mut m, &[s], &TrainConfig::default()).is_err());
        assert!(fit(&mut m, &[], &TrainConfig::default()).is_err());
    }
}
