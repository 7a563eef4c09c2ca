use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::io::write_atomic;
use crate::irl::{AirlConfig, SortingMdp};
use crate::kinematics::RobotSpec;
use crate::perception::PredictorTrainConfig;
use crate::planners::{PlannerConfig, PlannerKind, PlanningScene};
use crate::retarget::{LearnedModelConfig, RetargetConfig};
use crate::world::{NoiseConfig, Task, TaskConfig};

pub const CONFIG_FILE: &str = "mimicarm.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Seeds {
    /// Training demonstrations use seeds `demos..demos + count`.
    pub demos: u64,
    /// Held-out demonstrations and evaluation episodes.
    pub eval: u64,
    /// Streams that train the keypoint, object and human-IK models.
    pub perception: u64,
    pub train: u64,
    pub irl: u64,
    pub planner: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds {
            demos: 0,
            eval: 100_000,
            perception: 200_000,
            train: 0,
            irl: 0,
            planner: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemoCounts {
    /// Demonstrations the IRL stage learns from.
    pub count: usize,
    pub held_out: usize,
    /// Extra streams for the pose and object models, which need more
    /// variety than a handful of demonstrations.
    pub perception: usize,
}

impl Default for DemoCounts {
    fn default() -> Self {
        DemoCounts {
            count: 10,
            held_out: 20,
            perception: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FkStage {
    pub samples: usize,
    pub model: LearnedModelConfig,
    /// Per-axis held-out RMSE above which train-all fails, metres.
    pub max_rmse: f64,
}

impl Default for FkStage {
    fn default() -> Self {
        let mut model = LearnedModelConfig::default();
        model.train.max_steps = 10_000;
        FkStage {
            samples: 20_000,
            model,
            max_rmse: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HumanIkStage {
    pub model: LearnedModelConfig,
    pub max_rmse: f64,
}

impl Default for HumanIkStage {
    fn default() -> Self {
        HumanIkStage {
            model: LearnedModelConfig::default(),
            max_rmse: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IrlStage {
    pub gamma: f64,
    pub horizon: usize,
    pub airl: AirlConfig,
}

impl Default for IrlStage {
    fn default() -> Self {
        let mdp = SortingMdp::default();
        IrlStage {
            gamma: mdp.gamma,
            horizon: mdp.horizon,
            airl: AirlConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalStage {
    pub lba_tolerance: f64,
    /// Episodes executed by run-pipeline and plan-baseline.
    pub episodes: usize,
    /// Step budget of a policy episode in run-pipeline.
    pub max_policy_steps: usize,
    /// Minimum turn angle for a path point to become a planner waypoint.
    pub corner_angle: f64,
}

impl Default for EvalStage {
    fn default() -> Self {
        EvalStage {
            lba_tolerance: 0.02,
            episodes: 10,
            max_policy_steps: 70,
            corner_angle: 0.05,
        }
    }
}

/// Everything a run needs. Relative paths resolve against the directory
/// holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub robot: PathBuf,
    /// Optional planning scene; the layout's open workspace when absent.
    pub scene: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seeds: Seeds,
    pub demos: DemoCounts,
    pub task: TaskConfig,
    pub noise: NoiseConfig,
    pub keypoints: PredictorTrainConfig,
    pub objects: PredictorTrainConfig,
    pub human_ik: HumanIkStage,
    pub restricted_fk: FkStage,
    pub retarget: RetargetConfig,
    pub planner: PlannerConfig,
    pub irl: IrlStage,
    pub eval: EvalStage,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            robot: PathBuf::from("robots/sawyer_like.json"),
            scene: Some(PathBuf::from("scene.json")),
            output_dir: PathBuf::from("run"),
            seeds: Seeds::default(),
            demos: DemoCounts::default(),
            task: TaskConfig::default(),
            noise: NoiseConfig {
                keypoint_noise_std: 0.002,
                dropout_prob: 0.2,
                ..NoiseConfig::default()
            },
            keypoints: PredictorTrainConfig::default(),
            objects: PredictorTrainConfig::default(),
            human_ik: HumanIkStage::default(),
            restricted_fk: FkStage::default(),
            retarget: RetargetConfig::default(),
            planner: PlannerConfig::default(),
            irl: IrlStage::default(),
            eval: EvalStage::default(),
            base_dir: PathBuf::new(),
        }
    }
}

/// Comment lines written above each section by `init-config`.
const SECTION_NOTES: &[(&str, &str)] = &[
    ("seeds", "Every random choice in a run derives from these."),
    ("demos", "Scripted-expert episodes: `count` for training, `held_out` for evaluation."),
    ("task", "Scene layout, camera, demonstrator arm and episode limits."),
    ("noise", "Pose-estimate noise and dropout, detector behaviour."),
    ("keypoints", "Keypoint gap-filling predictor (two recurrent layers, dense head)."),
    ("objects", "Object-location predictor."),
    ("human_ik", "Wrist position to hip, shoulder and elbow."),
    ("restricted_fk", "Learned forward model of the four mapped cobot joints."),
    ("retarget", "Gradient refinement: alpha weights the adjustment penalty, pos_threshold is the convergence radius (m)."),
    ("planner", "Baseline planner; RRT for sorting, RRT-connect for pouring."),
    ("irl", "Adversarial IRL on the sorting task."),
    ("eval", "Evaluation settings."),
];

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| PipelineError::Validation(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, PipelineError> {
        let body = toml::to_string(self).map_err(|e| PipelineError::Validation(e.to_string()))?;
        let mut out = String::from("# mimicarm run configuration. Paths are relative to this file.\n\n");
        for line in body.lines() {
            let header = line.strip_prefix('[').and_then(|l| l.strip_suffix(']'));
            if let Some(note) = header.and_then(|h| SECTION_NOTES.iter().find(|(k, _)| *k == h)) {
                if !out.ends_with("\n\n") {
                    out.push('\n');
                }
                out.push_str("# ");
                out.push_str(note.1);
                out.push('\n');
            }
            out.push_str(line);
            out.push('\n');
        }
        Ok(out)
    }

    /// Checks every stage setting and that referenced files load.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let v = |e: &dyn std::fmt::Display| PipelineError::Validation(e.to_string());
        self.task.validate().map_err(|e| v(&e))?;
        self.noise.validate().map_err(|e| v(&e))?;
        for t in [&self.keypoints.train, &self.objects.train, &self.human_ik.model.train, &self.restricted_fk.model.train] {
            t.validate().map_err(|e| v(&e))?;
        }
        self.retarget.ik.validate().map_err(|e| v(&e))?;
        self.planner.validate().map_err(|e| v(&e))?;
        self.irl.airl.validate().map_err(|e| v(&e))?;
        if self.demos.count == 0 || self.demos.held_out == 0 || self.eval.episodes == 0 {
            return Err(PipelineError::Validation("demo counts and eval.episodes must be positive".into()));
        }
        if !(self.eval.lba_tolerance > 0.0) {
            return Err(PipelineError::Validation("eval.lba_tolerance must be positive".into()));
        }
        self.load_robot()?;
        self.load_scene()?;
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn robot_path(&self) -> PathBuf {
        self.resolve(&self.robot)
    }

    pub fn load_robot(&self) -> Result<RobotSpec, PipelineError> {
        let p = self.robot_path();
        RobotSpec::load(&p).map_err(|e| PipelineError::Validation(format!("robot {}: {e}", p.display())))
    }

    pub fn load_scene(&self) -> Result<PlanningScene, PipelineError> {
        match &self.scene {
            Some(s) => {
                let p = self.resolve(s);
                PlanningScene::load(&p).map_err(|e| PipelineError::Validation(format!("scene {}: {e}", p.display())))
            }
            None => Ok(PlanningScene::from_layout(&self.task.layout)),
        }
    }

    pub fn mdp(&self) -> SortingMdp {
        SortingMdp {
            task: self.task.clone(),
            gamma: self.irl.gamma,
            horizon: self.irl.horizon,
        }
    }

    pub fn planner_kind(&self) -> PlannerKind {
        match self.task.task {
            Task::Sorting => PlannerKind::Rrt,
            Task::Pouring => PlannerKind::RrtConnect,
        }
    }

    /// sha256 of the canonical TOML rendering.
    pub fn digest(&self) -> Result<String, PipelineError> {
        let body = toml::to_string(self).map_err(|e| PipelineError::Validation(e.to_string()))?;
        Ok(crate::io::sha256_hex(body.as_bytes()))
    }
}

/// Writes a default config plus the files it references into `dir`.
/// Refuses to overwrite existing files unless `force` is set.
pub fn init_config(dir: &Path, task: Task, force: bool) -> Result<Vec<PathBuf>, PipelineError> {
    let mut cfg = RunConfig::default();
    if task == Task::Pouring {
        cfg.task = TaskConfig::pouring();
    }
    let files = [
        (dir.join(CONFIG_FILE), cfg.to_toml()?),
        (dir.join("robots/sawyer_like.json"), RobotSpec::sawyer_like().to_json()),
        (dir.join("robots/kuka_like.json"), RobotSpec::kuka_like().to_json()),
        (
            dir.join("scene.json"),
            serde_json::to_string_pretty(&PlanningScene::from_layout(&cfg.task.layout)).map_err(|e| PipelineError::Runtime(e.to_string()))?,
        ),
    ];
    if !force {
        if let Some((p, _)) = files.iter().find(|(p, _)| p.exists()) {
            return Err(PipelineError::Validation(format!("{} already exists (use --force to overwrite)", p.display())));
        }
    }
    let mut written = Vec::new();
    for (p, text) in files {
        write_atomic(&p, text.as_bytes())?;
        written.push(p);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let dir = tempfile::tempdir().unwrap();
        init_config(dir.path(), Task::Sorting, false).unwrap();
        let path = dir.path().join(CONFIG_FILE);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("# Adversarial IRL"));
        let cfg = RunConfig::load(&path).unwrap();
        let expect = RunConfig {
            base_dir: dir.path().to_path_buf(),
            ..RunConfig::default()
        };
        assert_eq!(cfg, expect);
        assert!(init_config(dir.path(), Task::Sorting, false).is_err());
        init_config(dir.path(), Task::Pouring, true).unwrap();
        assert_eq!(RunConfig::load(&path).unwrap().planner_kind(), PlannerKind::RrtConnect);
    }

    #[test]
    fn bad_robot_path_fails_validation() {
        let dir = tempfile::tempdir().unwrap();
        init_config(dir.path(), Task::Sorting, false).unwrap();
        let path = dir.path().join(CONFIG_FILE);
        let text = std::fs::read_to_string(&path).unwrap().replace("robots/sawyer_like.json", "robots/missing.json");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(RunConfig::load(&path), Err(PipelineError::Validation(m)) if m.contains("missing.json")));
    }
}
