use super::{fit, Checkpoint, Model, NnError, RecurrentState, SequenceSample, Standardizer, Tensor, TrainConfig, TrainOutcome, TrainingMeta};

/// A model wrapped in input and output standardizers, so callers work in
/// physical units while the network sees unit-scale features.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledModel {
    pub model: Model,
    pub input: Standardizer,
    pub output: Standardizer,
}

impl ScaledModel {
    /// Identity scaling: the wrapper is transparent.
    pub fn unscaled(model: Model) -> Self {
        let (i, o) = (model.spec().input_dim(), model.spec().output_dim());
        ScaledModel {
            model,
            input: Standardizer::identity(i),
            output: Standardizer::identity(o),
        }
    }

    /// Fits both standardizers on the present inputs and targets of `samples`.
    pub fn with_scalers_from(model: Model, samples: &[SequenceSample]) -> Result<Self, NnError> {
        let input = Standardizer::fit(samples.iter().flat_map(|s| s.inputs.iter().map(|x| x.as_slice())))?;
        let output = Standardizer::fit(samples.iter().flat_map(|s| s.targets.iter().flatten().map(|t| t.as_slice())))?;
        if input.dim() != model.spec().input_dim() || output.dim() != model.spec().output_dim() {
            return Err(NnError::Shape(
                vec![model.spec().input_dim(), model.spec().output_dim()],
                vec![input.dim(), output.dim()],
            ));
        }
        Ok(ScaledModel { model, input, output })
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        Ok(self.output.invert(&self.model.predict(&self.input.apply(x))?))
    }

    /// One recurrent step in physical units.
    pub fn step(&self, x: &[f64], state: Option<&RecurrentState>) -> Result<(Vec<f64>, Option<RecurrentState>), NnError> {
        let (y, s) = self.model.forward(&Tensor::vector(self.input.apply(x))?, state)?;
        Ok((self.output.invert(y.values()), s))
    }

    /// Output and the gradient of `dot(out_grad, output)` with respect to the
    /// input, both in physical units. Feed-forward use only.
    pub fn input_gradient(&self, x: &[f64], out_grad: &[f64]) -> Result<(Vec<f64>, Vec<f64>), NnError> {
        let (y, cache) = self.model.forward_sequence(&[self.input.apply(x)])?;
        let g_net: Vec<f64> = out_grad.iter().zip(&self.output.scale.0).map(|(g, s)| g * s).collect();
        let grads = self.model.backward(&cache, &[g_net])?;
        let gx = grads.inputs[0].iter().zip(&self.input.scale.0).map(|(g, s)| g / s).collect();
        Ok((self.output.invert(&y[0]), gx))
    }

    /// Trains the inner model on `samples` expressed in physical units.
    pub fn train(&mut self, samples: &[SequenceSample], cfg: &TrainConfig) -> Result<TrainOutcome, NnError> {
        let scaled: Vec<SequenceSample> = samples
            .iter()
            .map(|s| SequenceSample {
                inputs: s.inputs.iter().map(|x| self.input.apply(x)).collect(),
                targets: s.targets.iter().map(|t| t.as_ref().map(|t| self.output.apply(t))).collect(),
            })
            .collect();
        fit(&mut self.model, &scaled, cfg)
    }

    pub fn to_checkpoint(&self, meta: TrainingMeta) -> Checkpoint {
        Checkpoint::new(&self.model, meta)
            .with_extra("input_mean", self.input.mean.0.clone())
            .with_extra("input_scale", self.input.scale.0.clone())
            .with_extra("output_mean", self.output.mean.0.clone())
            .with_extra("output_scale", self.output.scale.0.clone())
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, NnError> {
        let model = ck.model()?;
        let get = |a: &str, b: &str, n: usize| -> Result<Standardizer, NnError> {
            let (m, s) = (ck.extra(a)?, ck.extra(b)?);
            if m.len() != n || s.len() != n || s.iter().any(|v| !(*v > 0.0)) {
                return Err(NnError::Checkpoint(format!("bad normalization vectors {a:?}/{b:?}")));
            }
            Ok(Standardizer {
                mean: crate::io::HexVec(m.to_vec()),
                scale: crate::io::HexVec(s.to_vec()),
            })
        };
        let input = get("input_mean", "input_scale", model.spec().input_dim())?;
        let output = get("output_mean", "output_scale", model.spec().output_dim())?;
        Ok(ScaledModel { model, input, output })
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Activation, LayerSpec, ModelSpec};
    use super::*;

    fn small() -> Model {
        let spec = ModelSpec::new(
            vec![
                LayerSpec::dense(2, 5, Activation::Relu),
                LayerSpec::dense(5, 2, Activation::Linear),
            ],
            3,
        )
        .unwrap();
        Model::new(spec).unwrap()
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut sm = ScaledModel::unscaled(small());
        sm.input.mean.0 = vec![0.3, -1.0];
        sm.input.scale.0 = vec![2.0, 0.5];
        sm.output.mean.0 = vec![1.0, 2.0];
        sm.output.scale.0 = vec![3.0, 0.25];
        let x = [0.7, -0.4];
        let w = [0.6, -1.3];
        let (_, g) = sm.input_gradient(&x, &w).unwrap();
        for k in 0..2 {
            let h = 1e-6;
            let f = |d: f64| {
                let mut xp = x;
                xp[k] += d;
                let y = sm.predict(&xp).unwrap();
                w[0] * y[0] + w[1] * y[1]
            };
            let fd = (f(h) - f(-h)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6 * (1.0 + fd.abs()), "{fd} vs {}", g[k]);
        }
    }

    #[test]
    fn checkpoint_keeps_scalers() {
        let mut sm = ScaledModel::unscaled(small());
        sm.input.scale.0 = vec![2.0, 0.5];
        let meta = TrainingMeta {
            steps: 0,
            final_loss: 0.0,
            config: TrainConfig::default(),
        };
        let back = ScaledModel::from_checkpoint(&sm.to_checkpoint(meta)).unwrap();
        assert_eq!(back, sm);
    }
}
