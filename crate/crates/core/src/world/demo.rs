use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::camera::{CameraModel, PixelDepth};
use super::detect::{select_object_of_interest, Detection, Label, ObjectOfInterest};
use super::scene::{DetectionModel, Layout, SceneState, Task};
use super::WorldError;
use crate::io::{read_jsonl, write_jsonl};
use crate::kinematics::{ArmKeypoints, HumanArmGeometry, HUMAN_ANGLE_LIMITS};
use crate::Vec3;

pub const DEMO_SCHEMA_VERSION: u32 = 1;

/// Preferred world-plane angle of the hand (index finger) in the arm's
/// plane: slightly past horizontal, pointing forward and down.
const HAND_ANGLE: f64 = 1.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Gaussian noise on every keypoint coordinate, metres.
    pub keypoint_noise_std: f64,
    /// Probability that a frame's keypoints are missing.
    pub dropout_prob: f64,
    /// Leading frames that are never dropped, so gap filling can bootstrap.
    pub protected_frames: usize,
    pub detection: DetectionModel,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            keypoint_noise_std: 0.0,
            dropout_prob: 0.0,
            protected_frames: 2,
            detection: DetectionModel::default(),
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), WorldError> {
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return Err(WorldError::InvalidConfig("dropout_prob must be in [0, 1)".into()));
        }
        if !(self.keypoint_noise_std >= 0.0) {
            return Err(WorldError::InvalidConfig("keypoint_noise_std must be non-negative".into()));
        }
        let d = &self.detection;
        if !(0.0 <= d.confidence_lo && d.confidence_lo <= d.confidence_hi && d.confidence_hi <= 1.0)
            || !(0.0..=1.0).contains(&d.revealed_confidence)
            || !(0.0..=1.0).contains(&d.miss_prob)
        {
            return Err(WorldError::InvalidConfig("detection confidences must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskConfig {
    pub task: Task,
    pub layout: Layout,
    pub camera: CameraModel,
    pub human: HumanArmGeometry,
    pub objects_per_episode: usize,
    /// Chance that a blemished object shows its blemish before inspection.
    pub blemish_visible_prob: f64,
    pub dt: f64,
    /// Accepted episode lengths in frames; scenes are resampled until one fits.
    pub min_frames: usize,
    pub max_frames: usize,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig {
            task: Task::Sorting,
            layout: Layout::default(),
            camera: CameraModel::default(),
            human: HumanArmGeometry::default(),
            objects_per_episode: 2,
            blemish_visible_prob: 0.5,
            dt: 0.1,
            min_frames: 25,
            max_frames: 35,
        }
    }
}

impl TaskConfig {
    pub fn validate(&self) -> Result<(), WorldError> {
        self.layout.validate()?;
        self.camera.validate()?;
        self.human
            .validate()
            .map_err(|e| WorldError::InvalidConfig(e.to_string()))?;
        if self.objects_per_episode == 0 {
            return Err(WorldError::InvalidConfig("objects_per_episode must be positive".into()));
        }
        if !(self.dt > 0.0) || self.min_frames < 2 || self.min_frames > self.max_frames {
            return Err(WorldError::InvalidConfig("need dt > 0 and 2 <= min_frames <= max_frames".into()));
        }
        Ok(())
    }

    pub fn pouring() -> Self {
        TaskConfig {
            task: Task::Pouring,
            ..Default::default()
        }
    }
}

/// Simulator-side facts recorded next to each observed frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameTruth {
    pub keypoints: ArmKeypoints,
    pub object_locations: Vec<Vec3>,
    /// Index of the object of interest under noise-free detection.
    pub ooi_index: Option<usize>,
    pub grasped: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: usize,
    /// Observed keypoints; `None` when the pose estimate dropped out.
    pub keypoints: Option<ArmKeypoints>,
    pub detections: Vec<Detection>,
    pub eef: Vec3,
    pub action: Vec3,
    /// Object slot of the state, from the observed detections.
    pub object_of_interest: ObjectOfInterest,
    /// Pouring only: the container is tilted on this frame.
    #[serde(default)]
    pub tilt: bool,
    pub truth: FrameTruth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoHeader {
    pub schema_version: u32,
    pub task: Task,
    pub seed: u64,
    pub dt: f64,
    pub noise: NoiseConfig,
    /// Scene attempts rejected before this one.
    pub rejected_scenes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    pub header: DemoHeader,
    pub frames: Vec<Frame>,
}

impl Demonstration {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn eef_path(&self) -> Vec<Vec3> {
        self.frames.iter().map(|f| f.eef).collect()
    }

    pub fn dropped_count(&self) -> usize {
        self.frames.iter().filter(|f| f.keypoints.is_none()).count()
    }

    pub fn save(&self, path: &Path) -> Result<(), WorldError> {
        write_jsonl(path, &self.header, &self.frames)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, WorldError> {
        let (header, frames): (DemoHeader, Vec<Frame>) = read_jsonl(path)?;
        if header.schema_version != DEMO_SCHEMA_VERSION {
            return Err(WorldError::InvalidConfig(format!(
                "{}: unsupported demonstration schema {}",
                path.display(),
                header.schema_version
            )));
        }
        if frames.len() < 2 {
            return Err(WorldError::InvalidConfig(format!("{}: fewer than 2 frames", path.display())));
        }
        Ok(Demonstration { header, frames })
    }
}

/// Demonstrator pose with the wrist at `eef`: analytic reach with the hand
/// held near a fixed angle in the arm plane.
pub fn demonstrator_pose(human: &HumanArmGeometry, eef: Vec3) -> Result<ArmKeypoints, WorldError> {
    let q = human
        .reach(eef, 0.0)
        .map_err(|e| WorldError::Generation(format!("demonstrator cannot reach {eef:?}: {e}")))?;
    let (lo, hi) = HUMAN_ANGLE_LIMITS[3];
    let dev = (HAND_ANGLE - q[1] - q[2]).clamp(lo, hi);
    Ok(human.fk(&[q[0], q[1], q[2], dev]))
}

fn noisy_detections<R: Rng>(scene: &SceneState, cfg: &TaskConfig, noise: &NoiseConfig, rng: &mut R) -> Result<Vec<Detection>, WorldError> {
    let model = &noise.detection;
    let mut out = Vec::new();
    for (i, ideal) in scene.ideal_detections(model) {
        let obj = &scene.objects[i];
        let confidence = if rng.gen_bool(model.miss_prob) {
            rng.gen_range(0.1..0.5)
        } else if obj.revealed {
            model.revealed_confidence
        } else {
            rng.gen_range(model.confidence_lo..=model.confidence_hi)
        };
        let mut px = cfg.camera.world_to_pixel(ideal.centroid)?;
        if model.pixel_noise > 0.0 {
            let n = Normal::new(0.0, model.pixel_noise).expect("positive std");
            px.x += n.sample(rng);
            px.y += n.sample(rng);
        }
        if model.depth_noise_mm > 0.0 {
            let n = Normal::new(0.0, model.depth_noise_mm).expect("positive std");
            px = PixelDepth {
                z_mm: (px.z_mm + n.sample(rng)).max(1.0),
                ..px
            };
        }
        out.push(Detection {
            label: ideal.label,
            confidence,
            centroid: cfg.camera.pixel_to_world(&px)?,
        });
    }
    Ok(out)
}

fn simulate<R: Rng>(cfg: &TaskConfig, noise: &NoiseConfig, rng: &mut R) -> Result<Vec<Frame>, WorldError> {
    let layout = &cfg.layout;
    let mut scene = SceneState::random(cfg.task, layout, cfg.objects_per_episode, cfg.blemish_visible_prob, rng)?;
    let kp_noise = if noise.keypoint_noise_std > 0.0 {
        Some(Normal::new(0.0, noise.keypoint_noise_std).expect("positive std"))
    } else {
        None
    };
    let mut frames: Vec<Frame> = Vec::new();
    let mut tilt = false;
    loop {
        let t = frames.len();
        if t > cfg.max_frames {
            return Err(WorldError::Generation("episode exceeded the frame budget".into()));
        }
        let clean = demonstrator_pose(&cfg.human, scene.eef)?;
        let mut observed = clean;
        if let Some(n) = &kp_noise {
            let mut six = observed.six();
            for p in six.iter_mut() {
                for v in p.iter_mut() {
                    *v += n.sample(rng);
                }
            }
            observed = ArmKeypoints::from_six(six);
        }
        let dropped = t >= noise.protected_frames && rng.gen_bool(noise.dropout_prob);
        let detections = noisy_detections(&scene, cfg, noise, rng)?;
        let object_of_interest = select_object_of_interest(&detections, scene.eef);
        let (_, ooi_index) = scene.ideal_object_of_interest();
        let done = scene.all_sorted();
        let action = if done { Vec3::zeros() } else { scene.expert_action(layout) };
        frames.push(Frame {
            t,
            keypoints: if dropped { None } else { Some(observed) },
            detections,
            eef: scene.eef,
            action,
            object_of_interest,
            tilt,
            truth: FrameTruth {
                keypoints: clean,
                object_locations: scene.objects.iter().map(|o| o.location).collect(),
                ooi_index,
                grasped: scene.grasped(),
            },
        });
        if done {
            return Ok(frames);
        }
        tilt = scene.apply(action, layout, cfg.dt).tilted;
    }
}

/// Runs the scripted expert on random scenes drawn from `seed` until an
/// episode of `min_frames..=max_frames` frames (terminal frame included)
/// results.
pub fn generate_demonstration(cfg: &TaskConfig, noise: &NoiseConfig, seed: u64) -> Result<Demonstration, WorldError> {
    cfg.validate()?;
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rejected = 0;
    let mut last_err = None;
    while rejected < 500 {
        match simulate(cfg, noise, &mut rng) {
            Ok(frames) if (cfg.min_frames..=cfg.max_frames).contains(&frames.len()) => {
                return Ok(Demonstration {
                    header: DemoHeader {
                        schema_version: DEMO_SCHEMA_VERSION,
                        task: cfg.task,
                        seed,
                        dt: cfg.dt,
                        noise: noise.clone(),
                        rejected_scenes: rejected,
                    },
                    frames,
                });
            }
            Ok(_) => {}
            Err(e @ WorldError::Generation(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
        rejected += 1;
    }
    Err(last_err.unwrap_or_else(|| {
        WorldError::Generation(format!(
            "no scene produced an episode of {}..={} frames",
            cfg.min_frames, cfg.max_frames
        ))
    }))
}

/// Labels the expert is allowed to see as the object-slot label for `task`.
pub fn task_labels(task: Task) -> &'static [Label] {
    match task {
        Task::Sorting => &[Label::Blemished, Label::Unblemished, Label::Unknown],
        Task::Pouring => &[Label::Red, Label::Blue, Label::Unknown],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_demo_is_action_consistent() {
        let cfg = TaskConfig::default();
        let d = generate_demonstration(&cfg, &NoiseConfig::default(), 1).unwrap();
        assert!((25..=35).contains(&d.len()));
        for w in d.frames.windows(2) {
            assert!((w[0].eef + w[0].action - w[1].eef).norm() < 1e-9);
            assert!(w[0].action.norm() <= cfg.layout.max_step + 1e-12);
        }
        assert_eq!(d.frames.last().unwrap().action, Vec3::zeros());
        assert!(d.frames.last().unwrap().object_of_interest.is_sentinel());
        assert_eq!(d.dropped_count(), 0);
        for f in &d.frames {
            let k = f.keypoints.unwrap();
            assert!((k.wrist - f.eef).norm() < 1e-9);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = TaskConfig::default();
        let noise = NoiseConfig {
            keypoint_noise_std: 0.01,
            dropout_prob: 0.2,
            ..Default::default()
        };
        let a = generate_demonstration(&cfg, &noise, 77).unwrap();
        let b = generate_demonstration(&cfg, &noise, 77).unwrap();
        assert_eq!(a, b);
        let c = generate_demonstration(&cfg, &noise, 78).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn dropout_rate_matches_configuration() {
        let cfg = TaskConfig::default();
        let noise = NoiseConfig {
            dropout_prob: 0.2,
            ..Default::default()
        };
        let (mut eligible, mut dropped) = (0usize, 0usize);
        let mut seed = 0;
        while eligible < 10_000 {
            let d = generate_demonstration(&cfg, &noise, seed).unwrap();
            assert!(d.frames[..2].iter().all(|f| f.keypoints.is_some()));
            eligible += d.len() - 2;
            dropped += d.dropped_count();
            seed += 1;
        }
        let frac = dropped as f64 / eligible as f64;
        assert!((0.18..=0.22).contains(&frac), "{frac}");
    }

    #[test]
    fn jsonl_round_trip() {
        let cfg = TaskConfig::pouring();
        let noise = NoiseConfig {
            dropout_prob: 0.3,
            keypoint_noise_std: 0.005,
            ..Default::default()
        };
        let d = generate_demonstration(&cfg, &noise, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("demo.jsonl");
        d.save(&p).unwrap();
        let back = Demonstration::load(&p).unwrap();
        assert_eq!(back, d);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.contains("neg_inf"));
        assert_eq!(text.lines().count(), d.len() + 1);
    }

    #[test]
    fn invalid_dropout_rejected() {
        let noise = NoiseConfig {
            dropout_prob: 1.0,
            ..Default::default()
        };
        assert!(generate_demonstration(&TaskConfig::default(), &noise, 0).is_err());
    }

    #[test]
    fn unreachable_layout_is_a_generation_error() {
        let mut cfg = TaskConfig::default();
        cfg.human.origin = Vec3::new(3.0, 0.0, 0.0);
        assert!(matches!(
            generate_demonstration(&cfg, &NoiseConfig::default(), 0),
            Err(WorldError::Generation(_))
        ));
    }
}
