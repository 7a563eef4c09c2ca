use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::RetargetError;
use crate::kinematics::RobotSpec;
use crate::nn::{Activation, Checkpoint, LayerSpec, Model, ModelSpec, ScaledModel, SequenceSample, TrainConfig, TrainingMeta};
use crate::perception::{pick, report_rows, split_demos, trained_meta, PredictorReport};
use crate::world::{Aabb, Demonstration};
use crate::Vec3;

pub fn human_ik_spec(seed: u64) -> ModelSpec {
    ModelSpec::new(
        vec![
            LayerSpec::dense(3, 256, Activation::Relu),
            LayerSpec::dense(256, 64, Activation::Relu),
            LayerSpec::dense(64, 32, Activation::Relu),
            LayerSpec::dense(32, 9, Activation::Linear),
        ],
        seed,
    )
    .expect("static architecture")
}

pub fn restricted_fk_spec(seed: u64) -> ModelSpec {
    ModelSpec::new(
        vec![
            LayerSpec::dense(4, 256, Activation::Relu),
            LayerSpec::dense(256, 64, Activation::Relu),
            LayerSpec::dense(64, 3, Activation::Linear),
        ],
        seed,
    )
    .expect("static architecture")
}

fn vec3(v: &[f64]) -> Vec3 {
    Vec3::new(v[0], v[1], v[2])
}

fn check_ff(net: &ScaledModel, i: usize, o: usize) -> Result<(), RetargetError> {
    let s = net.model.spec();
    if s.input_dim() != i || s.output_dim() != o || s.has_recurrent() {
        return Err(RetargetError::Architecture(format!(
            "expected a feed-forward {i} -> {o} model, got {} -> {}",
            s.input_dim(),
            s.output_dim()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HumanIkOutput {
    pub hip: Vec3,
    pub shoulder: Vec3,
    pub elbow: Vec3,
    /// The wrist lies outside the box spanned by the training wrists.
    pub extrapolated: bool,
}

/// Wrist position to hip, shoulder and elbow: the pose the demonstrator
/// typically holds for that wrist.
#[derive(Debug, Clone, PartialEq)]
pub struct HumanIk {
    pub net: ScaledModel,
    pub envelope: Aabb,
}

impl HumanIk {
    pub fn new(net: ScaledModel, envelope: Aabb) -> Result<Self, RetargetError> {
        check_ff(&net, 3, 9)?;
        Ok(HumanIk { net, envelope })
    }

    pub fn zeros() -> Self {
        HumanIk {
            net: ScaledModel::unscaled(Model::zeros(human_ik_spec(0)).expect("valid spec")),
            envelope: Aabb::new(Vec3::repeat(f64::NEG_INFINITY), Vec3::repeat(f64::INFINITY)),
        }
    }

    pub fn predict(&self, wrist: Vec3) -> Result<HumanIkOutput, RetargetError> {
        if wrist.iter().any(|v| !v.is_finite()) {
            return Err(RetargetError::NonFinite("wrist"));
        }
        let y = self.net.predict(wrist.as_slice())?;
        let extrapolated = !self.envelope.contains(&wrist);
        if extrapolated {
            log::debug!("human IK extrapolating: wrist {:?} is outside the training envelope", wrist.as_slice());
        }
        Ok(HumanIkOutput {
            hip: vec3(&y[0..3]),
            shoulder: vec3(&y[3..6]),
            elbow: vec3(&y[6..9]),
            extrapolated,
        })
    }

    pub fn to_checkpoint(&self, meta: TrainingMeta) -> Checkpoint {
        self.net
            .to_checkpoint(meta)
            .with_extra("envelope_min", self.envelope.min.as_slice().to_vec())
            .with_extra("envelope_max", self.envelope.max.as_slice().to_vec())
    }

    pub fn load(path: &Path) -> Result<Self, RetargetError> {
        let ck = Checkpoint::load(path)?;
        let env = Aabb::new(vec3(ck.extra("envelope_min")?), vec3(ck.extra("envelope_max")?));
        Self::new(ScaledModel::from_checkpoint(&ck)?, env)
    }
}

/// One sample per observed frame: wrist in, (hip, shoulder, elbow) out.
pub fn human_ik_samples(demos: &[Demonstration]) -> Vec<SequenceSample> {
    demos
        .iter()
        .flat_map(|d| d.frames.iter())
        .filter_map(|f| f.keypoints)
        .map(|k| {
            let mut y = Vec::with_capacity(9);
            for p in [k.hip, k.shoulder, k.elbow] {
                y.extend_from_slice(p.as_slice());
            }
            SequenceSample::single(k.wrist.as_slice().to_vec(), y)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnedModelConfig {
    pub train: TrainConfig,
    pub eval_fraction: f64,
}

impl Default for LearnedModelConfig {
    fn default() -> Self {
        LearnedModelConfig {
            train: TrainConfig {
                learning_rate: 1e-3,
                batch_size: 32,
                max_steps: 5000,
                ..TrainConfig::default()
            },
            eval_fraction: 0.1,
        }
    }
}

fn envelope_of<'a>(points: impl Iterator<Item = &'a [f64]>) -> Aabb {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for p in points {
        let p = vec3(p);
        lo = lo.inf(&p);
        hi = hi.sup(&p);
    }
    Aabb::new(lo, hi)
}

/// Trains on a demonstration-level split; the report covers held-out frames.
pub fn train_human_ik(demos: &[Demonstration], cfg: &LearnedModelConfig, seed: u64) -> Result<(HumanIk, PredictorReport, TrainingMeta), RetargetError> {
    let (train_idx, eval_idx) = split_demos(demos.len(), cfg.eval_fraction, seed)?;
    let train = human_ik_samples(&pick(demos, &train_idx));
    if train.len() < 2 {
        return Err(RetargetError::InsufficientData("fewer than 2 observed frames".into()));
    }
    let envelope = envelope_of(train.iter().map(|s| s.inputs[0].as_slice()));
    let mut net = ScaledModel::with_scalers_from(Model::new(human_ik_spec(seed))?, &train)?;
    let tc = TrainConfig { seed, ..cfg.train.clone() };
    let outcome = net.train(&train, &tc)?;
    let ik = HumanIk::new(net, envelope)?;
    let eval = human_ik_samples(&pick(demos, &eval_idx));
    let pred = eval.iter().map(|s| ik.net.predict(&s.inputs[0])).collect::<Result<Vec<_>, _>>()?;
    let target: Vec<Vec<f64>> = eval.iter().map(|s| s.targets[0].clone().expect("present")).collect();
    let report = PredictorReport {
        rows: report_rows(&["hip", "shoulder", "elbow"], &pred, &target)?,
        train_demos: train_idx.len(),
        eval_demos: eval_idx.len(),
        eval_predictions: pred.len(),
        steps: outcome.steps,
        final_loss: outcome.final_loss,
    };
    Ok((ik, report, trained_meta(&outcome, &tc)))
}

/// End-effector position as a function of the four mapped joints, with
/// every other joint at neutral.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedFk {
    pub net: ScaledModel,
}

impl RestrictedFk {
    pub fn new(net: ScaledModel) -> Result<Self, RetargetError> {
        check_ff(&net, 4, 3)?;
        Ok(RestrictedFk { net })
    }

    pub fn zeros() -> Self {
        RestrictedFk {
            net: ScaledModel::unscaled(Model::zeros(restricted_fk_spec(0)).expect("valid spec")),
        }
    }

    pub fn predict(&self, q4: &[f64; 4]) -> Result<Vec3, RetargetError> {
        Ok(vec3(&self.net.predict(q4)?))
    }

    /// Position and the gradient of `dot(w, position)` with respect to the angles.
    pub fn predict_with_gradient(&self, q4: &[f64; 4], w: &Vec3) -> Result<(Vec3, [f64; 4]), RetargetError> {
        let (y, g) = self.net.input_gradient(q4, w.as_slice())?;
        Ok((vec3(&y), [g[0], g[1], g[2], g[3]]))
    }

    pub fn to_checkpoint(&self, meta: TrainingMeta) -> Checkpoint {
        self.net.to_checkpoint(meta)
    }

    pub fn load(path: &Path) -> Result<Self, RetargetError> {
        Self::new(ScaledModel::from_checkpoint(&Checkpoint::load(path)?)?)
    }
}

/// Uniform draws inside the mapped-joint limits, labelled by the analytic oracle.
pub fn restricted_fk_samples(robot: &RobotSpec, n: usize, seed: u64) -> Vec<SequenceSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lim = robot.mapped_limits();
    (0..n)
        .map(|_| {
            let q = lim.map(|(lo, hi)| rng.gen_range(lo..=hi));
            SequenceSample::single(q.to_vec(), robot.restricted_fk_oracle(&q).as_slice().to_vec())
        })
        .collect()
}

pub const MIN_FK_SAMPLES: usize = 1000;

/// Trains the learned restricted FK on `n_samples` oracle draws, holding out
/// `eval_fraction` of them for the report.
pub fn train_restricted_fk(robot: &RobotSpec, n_samples: usize, cfg: &LearnedModelConfig, seed: u64) -> Result<(RestrictedFk, PredictorReport, TrainingMeta), RetargetError> {
    if n_samples < MIN_FK_SAMPLES {
        return Err(RetargetError::InsufficientData(format!("need at least {MIN_FK_SAMPLES} samples, got {n_samples}")));
    }
    let mut all = restricted_fk_samples(robot, n_samples, seed);
    let n_eval = ((n_samples as f64 * cfg.eval_fraction).round() as usize).clamp(1, n_samples - 1);
    let eval = all.split_off(n_samples - n_eval);
    let mut net = ScaledModel::with_scalers_from(Model::new(restricted_fk_spec(seed))?, &all)?;
    let tc = TrainConfig { seed, ..cfg.train.clone() };
    let outcome = net.train(&all, &tc)?;
    let fk = RestrictedFk::new(net)?;
    let pred = eval.iter().map(|s| fk.net.predict(&s.inputs[0])).collect::<Result<Vec<_>, _>>()?;
    let target: Vec<Vec<f64>> = eval.iter().map(|s| s.targets[0].clone().expect("present")).collect();
    let report = PredictorReport {
        rows: report_rows(&["eef"], &pred, &target)?,
        train_demos: all.len(),
        eval_demos: eval.len(),
        eval_predictions: pred.len(),
        steps: outcome.steps,
        final_loss: outcome.final_loss,
    };
    Ok((fk, report, trained_meta(&outcome, &tc)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayerKind;

    #[test]
    fn architectures_match() {
        let w = |s: &ModelSpec| s.layers.iter().map(|l| (l.kind, l.out_dim)).collect::<Vec<_>>();
        use LayerKind::Dense;
        assert_eq!(w(&human_ik_spec(0)), vec![(Dense, 256), (Dense, 64), (Dense, 32), (Dense, 9)]);
        assert_eq!(w(&restricted_fk_spec(0)), vec![(Dense, 256), (Dense, 64), (Dense, 3)]);
    }

    #[test]
    fn zero_models() {
        let out = HumanIk::zeros().predict(Vec3::new(0.4, 0.1, 0.2)).unwrap();
        assert_eq!((out.hip, out.shoulder, out.elbow), (Vec3::zeros(), Vec3::zeros(), Vec3::zeros()));
        assert!(!out.extrapolated);
        assert_eq!(RestrictedFk::zeros().predict(&[0.1; 4]).unwrap(), Vec3::zeros());
        assert!(HumanIk::zeros().predict(Vec3::new(f64::NAN, 0.0, 0.0)).is_err());
    }

    #[test]
    fn envelope_flags_extrapolation() {
        let mut ik = HumanIk::zeros();
        ik.envelope = Aabb::new(Vec3::zeros(), Vec3::repeat(1.0));
        assert!(!ik.predict(Vec3::repeat(0.5)).unwrap().extrapolated);
        assert!(ik.predict(Vec3::new(0.5, 0.5, 2.0)).unwrap().extrapolated);
    }

    #[test]
    fn averaging_two_elbows() {
        // Same wrist, two different elbows: the MSE minimizer sits between them.
        let wrist = vec![0.4, 0.0, 0.2];
        let mk = |elbow_y: f64| SequenceSample::single(wrist.clone(), vec![0.8, 0.0, 0.0, 0.7, -0.2, 0.35, 0.6, elbow_y, 0.3]);
        let samples: Vec<SequenceSample> = (0..32).map(|i| mk(if i % 2 == 0 { -0.1 } else { 0.1 })).collect();
        let mut net = ScaledModel::unscaled(Model::new(human_ik_spec(1)).unwrap());
        let cfg = TrainConfig { max_steps: 400, learning_rate: 1e-2, ..TrainConfig::default() };
        net.train(&samples, &cfg).unwrap();
        let ik = HumanIk::new(net, Aabb::new(Vec3::repeat(-1.0), Vec3::repeat(1.0))).unwrap();
        let e = ik.predict(Vec3::new(0.4, 0.0, 0.2)).unwrap().elbow;
        assert!(e.y > -0.1 && e.y < 0.1, "{e:?}");
        assert!(e.y.abs() < 0.02);
    }

    #[test]
    fn fk_samples_within_limits() {
        let r = RobotSpec::sawyer_like();
        let lim = r.mapped_limits();
        for s in restricted_fk_samples(&r, 200, 4) {
            for (v, (lo, hi)) in s.inputs[0].iter().zip(lim) {
                assert!(*v >= lo && *v <= hi);
            }
        }
        assert!(matches!(
            train_restricted_fk(&r, 999, &LearnedModelConfig::default(), 0),
            Err(RetargetError::InsufficientData(_))
        ));
    }
}
