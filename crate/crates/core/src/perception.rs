//! Gap filling for the observation stream: a recurrent keypoint predictor
//! that replaces dropped or implausible arm poses, and a recurrent object
//! locator that tracks the object of interest when its detection is missed.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::ArmKeypoints;
use crate::metrics::{regression_metrics, RegressionMetrics};
use crate::nn::{Checkpoint, Model, ModelSpec, NnError, RecurrentState, ScaledModel, SequenceSample, TrainConfig, TrainingMeta};
use crate::world::{Demonstration, ObjectOfInterest};
use crate::Vec3;

pub const KEYPOINT_INPUTS: usize = 36;
pub const KEYPOINT_OUTPUTS: usize = 12;
pub const OBJECT_INPUTS: usize = 9;
pub const OBJECT_OUTPUTS: usize = 3;
/// A joint moving further than this per frame since the last reliable
/// observation marks the frame as unreliable.
pub const JUMP_THRESHOLD: f64 = 0.3;
pub const CORE_JOINTS: [&str; 4] = ["hip", "shoulder", "elbow", "wrist"];

#[derive(Debug, Error)]
pub enum PerceptionError {
    #[error("non-finite input")]
    NonFinite,
    #[error("object location is the no-object sentinel")]
    Sentinel,
    #[error("the first two frames must be observed to start filling (frame {0} is missing)")]
    CannotBootstrap(usize),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("wrong architecture: {0}")]
    Architecture(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn keypoint_spec(seed: u64) -> ModelSpec {
    ModelSpec::stacked(KEYPOINT_INPUTS, &[64, 64], &[256, 64], KEYPOINT_OUTPUTS, seed).expect("static architecture")
}

pub fn object_spec(seed: u64) -> ModelSpec {
    ModelSpec::stacked(OBJECT_INPUTS, &[64, 32], &[256, 64], OBJECT_OUTPUTS, seed).expect("static architecture")
}

fn check_dims(m: &ScaledModel, i: usize, o: usize) -> Result<(), PerceptionError> {
    let s = m.model.spec();
    if s.input_dim() != i || s.output_dim() != o || !s.has_recurrent() {
        return Err(PerceptionError::Architecture(format!(
            "expected a recurrent {i} -> {o} model, got {} -> {}",
            s.input_dim(),
            s.output_dim()
        )));
    }
    Ok(())
}

fn finite(points: &[Vec3]) -> bool {
    points.iter().all(|p| p.iter().all(|v| v.is_finite()))
}

fn push3(out: &mut Vec<f64>, p: Vec3) {
    out.extend_from_slice(p.as_slice());
}

fn vec3(v: &[f64]) -> Vec3 {
    Vec3::new(v[0], v[1], v[2])
}

/// Network input for the keypoint model: both frames' six joints, centered
/// on the hip of the older frame.
pub fn encode_keypoints(prev: &[Vec3; 6], cur: &[Vec3; 6]) -> Vec<f64> {
    let origin = prev[0];
    let mut x = Vec::with_capacity(KEYPOINT_INPUTS);
    for p in prev.iter().chain(cur.iter()) {
        push3(&mut x, p - origin);
    }
    x
}

fn keypoint_target(prev: &[Vec3; 6], next: &ArmKeypoints) -> Vec<f64> {
    let mut y = Vec::with_capacity(KEYPOINT_OUTPUTS);
    for p in next.core() {
        push3(&mut y, p - prev[0]);
    }
    y
}

/// Network input for the object model, centered on the previous object location.
pub fn encode_object(obj_prev: Vec3, eef_prev: Vec3, eef: Vec3) -> Vec<f64> {
    let mut x = Vec::with_capacity(OBJECT_INPUTS);
    push3(&mut x, Vec3::zeros());
    push3(&mut x, eef_prev - obj_prev);
    push3(&mut x, eef - obj_prev);
    x
}

/// Predicts the next frame's hip, shoulder, elbow and wrist from the two
/// most recent complete frames.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointPredictor {
    pub net: ScaledModel,
}

impl KeypointPredictor {
    pub fn new(net: ScaledModel) -> Result<Self, PerceptionError> {
        check_dims(&net, KEYPOINT_INPUTS, KEYPOINT_OUTPUTS)?;
        Ok(KeypointPredictor { net })
    }

    pub fn untrained(seed: u64) -> Self {
        KeypointPredictor {
            net: ScaledModel::unscaled(Model::new(keypoint_spec(seed)).expect("valid spec")),
        }
    }

    /// All-zero weights and identity scaling.
    pub fn zeros() -> Self {
        KeypointPredictor {
            net: ScaledModel::unscaled(Model::zeros(keypoint_spec(0)).expect("valid spec")),
        }
    }

    /// One step of a stream; `state` carries the recurrent memory.
    pub fn step(&self, prev: &[Vec3; 6], cur: &[Vec3; 6], state: Option<&RecurrentState>) -> Result<([Vec3; 4], Option<RecurrentState>), PerceptionError> {
        if !finite(prev) || !finite(cur) {
            return Err(PerceptionError::NonFinite);
        }
        let (y, s) = self.net.step(&encode_keypoints(prev, cur), state)?;
        let out = [0, 1, 2, 3].map(|j| vec3(&y[3 * j..3 * j + 3]) + prev[0]);
        Ok((out, s))
    }

    /// Stateless prediction from fresh recurrent memory.
    pub fn predict(&self, prev: &[Vec3; 6], cur: &[Vec3; 6]) -> Result<[Vec3; 4], PerceptionError> {
        Ok(self.step(prev, cur, None)?.0)
    }

    pub fn load(path: &Path) -> Result<Self, PerceptionError> {
        Self::new(ScaledModel::from_checkpoint(&Checkpoint::load(path)?)?)
    }
}

/// Predicts the object location from its previous location and the last
/// two end-effector positions.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectLocator {
    pub net: ScaledModel,
}

impl ObjectLocator {
    pub fn new(net: ScaledModel) -> Result<Self, PerceptionError> {
        check_dims(&net, OBJECT_INPUTS, OBJECT_OUTPUTS)?;
        Ok(ObjectLocator { net })
    }

    pub fn untrained(seed: u64) -> Self {
        ObjectLocator {
            net: ScaledModel::unscaled(Model::new(object_spec(seed)).expect("valid spec")),
        }
    }

    pub fn zeros() -> Self {
        ObjectLocator {
            net: ScaledModel::unscaled(Model::zeros(object_spec(0)).expect("valid spec")),
        }
    }

    pub fn step(&self, obj_prev: Vec3, eef_prev: Vec3, eef: Vec3, state: Option<&RecurrentState>) -> Result<(Vec3, Option<RecurrentState>), PerceptionError> {
        if obj_prev.iter().any(|v| *v == f64::NEG_INFINITY) {
            return Err(PerceptionError::Sentinel);
        }
        if !finite(&[obj_prev, eef_prev, eef]) {
            return Err(PerceptionError::NonFinite);
        }
        let (y, s) = self.net.step(&encode_object(obj_prev, eef_prev, eef), state)?;
        Ok((obj_prev + vec3(&y), s))
    }

    pub fn predict(&self, obj_prev: Vec3, eef_prev: Vec3, eef: Vec3) -> Result<Vec3, PerceptionError> {
        Ok(self.step(obj_prev, eef_prev, eef, None)?.0)
    }

    pub fn load(path: &Path) -> Result<Self, PerceptionError> {
        Self::new(ScaledModel::from_checkpoint(&Checkpoint::load(path)?)?)
    }
}

/// Runs of consecutive observed frames (dropped frames split a stream).
fn observed_runs(demo: &Demonstration) -> Vec<Vec<ArmKeypoints>> {
    let mut runs = Vec::new();
    let mut cur = Vec::new();
    for f in &demo.frames {
        match f.keypoints {
            Some(k) => cur.push(k),
            None => runs.push(std::mem::take(&mut cur)),
        }
    }
    runs.push(cur);
    runs.retain(|r| r.len() >= 3);
    runs
}

/// One sequence per run of at least three observed frames; step `t` sees
/// frames `t`, `t+1` and is trained to produce frame `t+2`.
pub fn keypoint_samples(demos: &[Demonstration]) -> Vec<SequenceSample> {
    let mut out = Vec::new();
    for d in demos {
        for run in observed_runs(d) {
            let six: Vec<[Vec3; 6]> = run.iter().map(|k| k.six()).collect();
            let mut s = SequenceSample { inputs: Vec::new(), targets: Vec::new() };
            for t in 0..run.len() - 2 {
                s.inputs.push(encode_keypoints(&six[t], &six[t + 1]));
                s.targets.push(Some(keypoint_target(&six[t], &run[t + 2])));
            }
            out.push(s);
        }
    }
    out
}

/// One sequence per object per demonstration, from simulator ground truth;
/// targets are displacements of the object.
pub fn object_samples(demos: &[Demonstration]) -> Vec<SequenceSample> {
    let mut out = Vec::new();
    for d in demos {
        let n_obj = d.frames.first().map_or(0, |f| f.truth.object_locations.len());
        for j in 0..n_obj {
            let mut s = SequenceSample { inputs: Vec::new(), targets: Vec::new() };
            for w in d.frames.windows(2) {
                let (a, b) = (w[0].truth.object_locations[j], w[1].truth.object_locations[j]);
                s.inputs.push(encode_object(a, w[0].eef, w[1].eef));
                s.targets.push(Some((b - a).as_slice().to_vec()));
            }
            if !s.inputs.is_empty() {
                out.push(s);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorTrainConfig {
    pub train: TrainConfig,
    /// Share of demonstrations held out for the report.
    pub eval_fraction: f64,
}

impl Default for PredictorTrainConfig {
    fn default() -> Self {
        PredictorTrainConfig {
            train: TrainConfig {
                learning_rate: 1e-3,
                batch_size: 8,
                max_steps: 2000,
                ..TrainConfig::default()
            },
            eval_fraction: 0.2,
        }
    }
}

/// Deterministic disjoint split of demonstration indices into (train, eval).
pub fn split_demos(n: usize, eval_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), PerceptionError> {
    if n < 2 {
        return Err(PerceptionError::InsufficientData(format!("need at least 2 demonstrations, got {n}")));
    }
    if !(0.0 < eval_fraction && eval_fraction < 1.0) {
        return Err(PerceptionError::InsufficientData("eval_fraction must be in (0, 1)".into()));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_eval = ((n as f64 * eval_fraction).round() as usize).clamp(1, n - 1);
    let eval = idx.split_off(n - n_eval);
    Ok((idx, eval))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub target: String,
    pub axis: String,
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorReport {
    pub rows: Vec<ReportRow>,
    pub train_demos: usize,
    pub eval_demos: usize,
    pub eval_predictions: usize,
    pub steps: u64,
    pub final_loss: f64,
}

impl PredictorReport {
    pub fn row(&self, target: &str, axis: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.target == target && r.axis == axis)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), PerceptionError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["target", "axis", "mse", "rmse", "mae", "r2"])?;
        for r in &self.rows {
            let r2 = r.r2.map_or_else(String::new, |v| v.to_string());
            w.write_record([r.target.clone(), r.axis.clone(), r.mse.to_string(), r.rmse.to_string(), r.mae.to_string(), r2])?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        crate::io::write_atomic(path, &bytes)?;
        Ok(())
    }
}

/// Per-axis rows for `names.len()` stacked 3-vectors.
pub(crate) fn report_rows(names: &[&str], pred: &[Vec<f64>], target: &[Vec<f64>]) -> Result<Vec<ReportRow>, PerceptionError> {
    let mut rows = Vec::new();
    for (j, name) in names.iter().enumerate() {
        for (a, axis) in ["x", "y", "z"].iter().enumerate() {
            let k = 3 * j + a;
            let p: Vec<f64> = pred.iter().map(|v| v[k]).collect();
            let t: Vec<f64> = target.iter().map(|v| v[k]).collect();
            let RegressionMetrics { mse, rmse, mae, r2 } =
                regression_metrics(&p, &t).map_err(|e| PerceptionError::InsufficientData(e.to_string()))?;
            rows.push(ReportRow {
                target: name.to_string(),
                axis: axis.to_string(),
                mse,
                rmse,
                mae,
                r2,
            });
        }
    }
    Ok(rows)
}

pub(crate) fn pick(demos: &[Demonstration], idx: &[usize]) -> Vec<Demonstration> {
    idx.iter().map(|&i| demos[i].clone()).collect()
}

pub(crate) fn trained_meta(o: &crate::nn::TrainOutcome, cfg: &TrainConfig) -> TrainingMeta {
    TrainingMeta {
        steps: o.steps,
        final_loss: o.final_loss,
        config: cfg.clone(),
    }
}

/// Trains the keypoint predictor on a demonstration-level split and
/// reports held-out errors of one-step predictions in world coordinates.
pub fn train_keypoint_predictor(
    demos: &[Demonstration],
    cfg: &PredictorTrainConfig,
    seed: u64,
) -> Result<(KeypointPredictor, PredictorReport, TrainingMeta), PerceptionError> {
    let (train_idx, eval_idx) = split_demos(demos.len(), cfg.eval_fraction, seed)?;
    let train = keypoint_samples(&pick(demos, &train_idx));
    if train.is_empty() {
        return Err(PerceptionError::InsufficientData("no run of three observed frames".into()));
    }
    let mut net = ScaledModel::with_scalers_from(Model::new(keypoint_spec(seed))?, &train)?;
    let tc = TrainConfig { seed, ..cfg.train.clone() };
    let outcome = net.train(&train, &tc)?;
    let predictor = KeypointPredictor::new(net)?;

    let (mut pred, mut target) = (Vec::new(), Vec::new());
    for d in pick(demos, &eval_idx) {
        for run in observed_runs(&d) {
            let six: Vec<[Vec3; 6]> = run.iter().map(|k| k.six()).collect();
            let mut state = None;
            for t in 0..run.len() - 2 {
                let (p, s) = predictor.step(&six[t], &six[t + 1], state.as_ref())?;
                state = s;
                pred.push(p.iter().flat_map(|v| v.iter().copied()).collect::<Vec<f64>>());
                target.push(run[t + 2].core().iter().flat_map(|v| v.iter().copied()).collect());
            }
        }
    }
    let report = PredictorReport {
        rows: report_rows(&CORE_JOINTS, &pred, &target)?,
        train_demos: train_idx.len(),
        eval_demos: eval_idx.len(),
        eval_predictions: pred.len(),
        steps: outcome.steps,
        final_loss: outcome.final_loss,
    };
    Ok((predictor, report, trained_meta(&outcome, &tc)))
}

/// Trains the object locator; the report covers every held-out object step.
pub fn train_object_locator(
    demos: &[Demonstration],
    cfg: &PredictorTrainConfig,
    seed: u64,
) -> Result<(ObjectLocator, PredictorReport, TrainingMeta), PerceptionError> {
    let (train_idx, eval_idx) = split_demos(demos.len(), cfg.eval_fraction, seed)?;
    let train = object_samples(&pick(demos, &train_idx));
    if train.is_empty() {
        return Err(PerceptionError::InsufficientData("no object tracks".into()));
    }
    let mut net = ScaledModel::with_scalers_from(Model::new(object_spec(seed))?, &train)?;
    let tc = TrainConfig { seed, ..cfg.train.clone() };
    let outcome = net.train(&train, &tc)?;
    let locator = ObjectLocator::new(net)?;
    let (pred, target): (Vec<_>, Vec<_>) = object_tracking(&locator, &pick(demos, &eval_idx))?
        .into_iter()
        .map(|t| (t.predicted.as_slice().to_vec(), t.actual.as_slice().to_vec()))
        .unzip();
    let report = PredictorReport {
        rows: report_rows(&["object"], &pred, &target)?,
        train_demos: train_idx.len(),
        eval_demos: eval_idx.len(),
        eval_predictions: pred.len(),
        steps: outcome.steps,
        final_loss: outcome.final_loss,
    };
    Ok((locator, report, trained_meta(&outcome, &tc)))
}

/// One teacher-forced object prediction on ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackedStep {
    pub predicted: Vec3,
    pub actual: Vec3,
    pub previous: Vec3,
    pub grasped: bool,
}

/// Runs the locator along every object's true track in `demos`.
pub fn object_tracking(locator: &ObjectLocator, demos: &[Demonstration]) -> Result<Vec<TrackedStep>, PerceptionError> {
    let mut out = Vec::new();
    for d in demos {
        let n_obj = d.frames.first().map_or(0, |f| f.truth.object_locations.len());
        for j in 0..n_obj {
            let mut state = None;
            for w in d.frames.windows(2) {
                let (a, b) = (w[0].truth.object_locations[j], w[1].truth.object_locations[j]);
                let (p, s) = locator.step(a, w[0].eef, w[1].eef, state.as_ref())?;
                state = s;
                out.push(TrackedStep {
                    predicted: p,
                    actual: b,
                    previous: a,
                    grasped: w[0].truth.grasped == Some(j),
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FillReport {
    /// Frames whose keypoints were missing.
    pub dropped: Vec<usize>,
    /// Observed frames replaced because a joint jumped implausibly.
    pub unreliable: Vec<usize>,
    /// Frames whose object slot was predicted.
    pub objects_filled: Vec<usize>,
}

fn max_jump(a: &ArmKeypoints, b: &ArmKeypoints) -> f64 {
    a.core().iter().zip(b.core().iter()).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max)
}

/// Completes a stream. Keypoints of dropped or unreliable frames are
/// predicted from the two preceding (possibly already filled) frames; the
/// fingers follow the predicted wrist with their previous offset. An
/// object slot is predicted when the detector saw objects but none
/// confidently while the previous frame had an object of interest.
/// Recurrent memory runs over the whole stream.
pub fn fill_gaps(
    demo: &Demonstration,
    keypoints: &KeypointPredictor,
    objects: &ObjectLocator,
) -> Result<(Demonstration, FillReport), PerceptionError> {
    for t in 0..2.min(demo.frames.len()) {
        if demo.frames[t].keypoints.is_none() {
            return Err(PerceptionError::CannotBootstrap(t));
        }
    }
    let mut out = demo.clone();
    let mut report = FillReport::default();
    let mut kp_state: Option<RecurrentState> = None;
    let mut obj_state: Option<RecurrentState> = None;
    let mut last_reliable = (0, demo.frames[0].keypoints.expect("checked"));
    for t in 1..out.frames.len() {
        if t >= 2 {
            let prev = out.frames[t - 2].keypoints.expect("filled");
            let cur = out.frames[t - 1].keypoints.expect("filled");
            let (p, s) = keypoints.step(&prev.six(), &cur.six(), kp_state.as_ref())?;
            kp_state = s;
            let observed = out.frames[t].keypoints;
            let replace = match observed {
                None => {
                    report.dropped.push(t);
                    true
                }
                Some(k) if max_jump(&k, &last_reliable.1) > JUMP_THRESHOLD * (t - last_reliable.0) as f64 => {
                    report.unreliable.push(t);
                    true
                }
                Some(k) => {
                    last_reliable = (t, k);
                    false
                }
            };
            if replace {
                let off = |f: Option<Vec3>| f.unwrap_or(cur.wrist) - cur.wrist;
                out.frames[t].keypoints = Some(ArmKeypoints {
                    hip: p[0],
                    shoulder: p[1],
                    elbow: p[2],
                    wrist: p[3],
                    index_finger: Some(p[3] + off(cur.index_finger)),
                    thumb: Some(p[3] + off(cur.thumb)),
                });
            }
        }

        let prev_ooi = out.frames[t - 1].object_of_interest;
        if prev_ooi.is_sentinel() {
            obj_state = None;
            continue;
        }
        let (eef_prev, eef) = (out.frames[t - 1].eef, out.frames[t].eef);
        let (p, s) = objects.step(prev_ooi.location, eef_prev, eef, obj_state.as_ref())?;
        obj_state = s;
        let f = &mut out.frames[t];
        if f.object_of_interest.is_sentinel() && !f.detections.is_empty() {
            f.object_of_interest = ObjectOfInterest {
                label: prev_ooi.label,
                location: p,
            };
            report.objects_filled.push(t);
        }
    }
    Ok((out, report))
}

/// Baseline: every missing frame repeats the last observed one.
pub fn zero_order_hold(demo: &Demonstration) -> Result<Vec<ArmKeypoints>, PerceptionError> {
    let mut last = demo.frames.first().and_then(|f| f.keypoints).ok_or(PerceptionError::CannotBootstrap(0))?;
    Ok(demo
        .frames
        .iter()
        .map(|f| {
            if let Some(k) = f.keypoints {
                last = k;
            }
            last
        })
        .collect())
}

/// Mean absolute coordinate error of the core joints against ground truth,
/// over the frames listed.
pub fn keypoint_mae(filled: &[ArmKeypoints], demo: &Demonstration, frames: &[usize]) -> Option<f64> {
    if frames.is_empty() {
        return None;
    }
    let mut sum = 0.0;
    for &t in frames {
        let truth = demo.frames[t].truth.keypoints.core();
        for (p, q) in filled[t].core().iter().zip(truth.iter()) {
            sum += (p - q).abs().sum();
        }
    }
    Some(sum / (frames.len() * 12) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayerKind;
    use crate::world::{generate_demonstration, NoiseConfig, TaskConfig};

    fn demo(seed: u64, dropout: f64) -> Demonstration {
        let noise = NoiseConfig {
            dropout_prob: dropout,
            ..Default::default()
        };
        generate_demonstration(&TaskConfig::default(), &noise, seed).unwrap()
    }

    #[test]
    fn architectures_match() {
        let widths = |s: &ModelSpec| s.layers.iter().map(|l| (l.kind, l.out_dim)).collect::<Vec<_>>();
        use LayerKind::*;
        assert_eq!(
            widths(&keypoint_spec(0)),
            vec![(Recurrent, 64), (Recurrent, 64), (Dense, 256), (Dense, 64), (Dense, 12)]
        );
        assert_eq!(
            widths(&object_spec(0)),
            vec![(Recurrent, 64), (Recurrent, 32), (Dense, 256), (Dense, 64), (Dense, 3)]
        );
        assert_eq!(keypoint_spec(0).input_dim(), 36);
        assert_eq!(object_spec(0).input_dim(), 9);
    }

    #[test]
    fn zero_models_return_the_reference_point() {
        let d = demo(1, 0.0);
        let (a, b) = (d.frames[0].keypoints.unwrap().six(), d.frames[1].keypoints.unwrap().six());
        let p = KeypointPredictor::zeros().predict(&a, &b).unwrap();
        assert!(p.iter().all(|v| *v == a[0]));
        let o = Vec3::new(0.5, 0.1, 0.1);
        assert_eq!(ObjectLocator::zeros().predict(o, Vec3::zeros(), Vec3::x()).unwrap(), o);
    }

    #[test]
    fn input_errors() {
        let mut a = [Vec3::zeros(); 6];
        let b = a;
        a[2].x = f64::NAN;
        assert!(matches!(KeypointPredictor::zeros().predict(&a, &b), Err(PerceptionError::NonFinite)));
        let s = ObjectOfInterest::none().location;
        assert!(matches!(
            ObjectLocator::zeros().predict(s, Vec3::zeros(), Vec3::zeros()),
            Err(PerceptionError::Sentinel)
        ));
    }

    #[test]
    fn fill_is_identity_on_complete_streams() {
        let d = demo(2, 0.0);
        let (out, r) = fill_gaps(&d, &KeypointPredictor::untrained(0), &ObjectLocator::untrained(0)).unwrap();
        assert_eq!(out, d);
        assert_eq!(r, FillReport::default());
    }

    #[test]
    fn fill_is_local() {
        let mut d = demo(3, 0.0);
        d.frames[10].keypoints = None;
        let (out, r) = fill_gaps(&d, &KeypointPredictor::untrained(0), &ObjectLocator::untrained(0)).unwrap();
        assert_eq!(r.dropped, vec![10]);
        for (t, (a, b)) in out.frames.iter().zip(&d.frames).enumerate() {
            assert_eq!(a == b, t != 10, "frame {t}");
        }
        assert!(out.frames[10].keypoints.unwrap().is_finite());
        assert_eq!(out.dropped_count(), 0);
    }

    #[test]
    fn fill_needs_two_leading_frames() {
        let mut d = demo(4, 0.0);
        d.frames[1].keypoints = None;
        assert!(matches!(
            fill_gaps(&d, &KeypointPredictor::zeros(), &ObjectLocator::zeros()),
            Err(PerceptionError::CannotBootstrap(1))
        ));
    }

    #[test]
    fn jumps_are_replaced() {
        let mut d = demo(5, 0.0);
        let k = d.frames[8].keypoints.unwrap();
        d.frames[8].keypoints = Some(k.translated(Vec3::new(0.0, 0.0, 0.5)));
        let (_, r) = fill_gaps(&d, &KeypointPredictor::untrained(0), &ObjectLocator::untrained(0)).unwrap();
        assert_eq!(r.unreliable, vec![8]);
    }

    #[test]
    fn missed_detection_is_filled() {
        let mut d = demo(6, 0.0);
        let t = (1..d.len() - 1).find(|&t| !d.frames[t - 1].object_of_interest.is_sentinel()).unwrap();
        for det in d.frames[t].detections.iter_mut() {
            det.confidence = 0.2;
        }
        d.frames[t].object_of_interest = ObjectOfInterest::none();
        let (out, r) = fill_gaps(&d, &KeypointPredictor::zeros(), &ObjectLocator::zeros()).unwrap();
        assert_eq!(r.objects_filled, vec![t]);
        assert_eq!(out.frames[t].object_of_interest, d.frames[t - 1].object_of_interest);
    }

    #[test]
    fn zoh_and_mae() {
        let mut d = demo(7, 0.0);
        d.frames[5].keypoints = None;
        let z = zero_order_hold(&d).unwrap();
        assert_eq!(z[5], d.frames[4].keypoints.unwrap());
        let truth: Vec<ArmKeypoints> = d.frames.iter().map(|f| f.truth.keypoints).collect();
        assert_eq!(keypoint_mae(&truth, &d, &[5]), Some(0.0));
        assert_eq!(keypoint_mae(&truth, &d, &[]), None);
    }

    #[test]
    fn split_is_disjoint() {
        let (a, b) = split_demos(10, 0.2, 3).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        assert!(a.iter().all(|i| !b.contains(i)));
        assert!(split_demos(1, 0.2, 0).is_err());
        assert_eq!(split_demos(2, 0.01, 0).unwrap().1.len(), 1);
    }

    #[test]
    fn sample_shapes() {
        let d = demo(8, 0.0);
        let k = keypoint_samples(std::slice::from_ref(&d));
        assert_eq!(k.len(), 1);
        assert_eq!(k[0].inputs.len(), d.len() - 2);
        assert_eq!(k[0].inputs[0].len(), 36);
        let o = object_samples(std::slice::from_ref(&d));
        assert_eq!(o.len(), 2);
        assert_eq!(o[0].targets[0].as_ref().unwrap().len(), 3);
    }

    #[test]
    fn report_csv_columns() {
        let r = PredictorReport {
            rows: report_rows(&["object"], &[vec![0.0, 1.0, 2.0], vec![1.0, 1.0, 2.0]], &[vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 2.0]]).unwrap(),
            train_demos: 1,
            eval_demos: 1,
            eval_predictions: 2,
            steps: 0,
            final_loss: 0.0,
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        r.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("target,axis,mse,rmse,mae,r2\nobject,x,0,0,0,1\n"));
        for row in &r.rows {
            assert!((row.rmse - row.mse.sqrt()).abs() < 1e-15 && row.mae <= row.rmse);
        }
    }
}
