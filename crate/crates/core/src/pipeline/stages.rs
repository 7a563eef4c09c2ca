use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{PipelineError, RunConfig, RunManifest};
use crate::io::{write_atomic, write_jsonl};
use crate::irl::{evaluate_lba, expert_pairs, train_airl, write_history_csv, GaussianPolicy, SortingMdp};
use crate::kinematics::RobotSpec;
use crate::metrics::{aggregate, displacement, jerkiness, regression_metrics, task_time, JointTrajectory};
use crate::nn::Checkpoint;
use crate::perception::{fill_gaps, keypoint_mae, train_keypoint_predictor, train_object_locator, zero_order_hold, KeypointPredictor, ObjectLocator};
use crate::planners::{path_corners, path_to_joint_trajectory, plan_through, PlannerConfig, PlanningScene, WaypointPath};
use crate::retarget::{train_human_ik, train_restricted_fk, HumanIk, RestrictedFk, RetargetConfig, Retargeter, SymbolicJointMap};
use crate::world::{generate_demonstration, Demonstration, Task};
use crate::Vec3;

/// File locations under the output directory.
pub mod layout {
    use std::path::{Path, PathBuf};

    pub fn train_demos(out: &Path) -> PathBuf {
        out.join("demos/train")
    }
    pub fn held_out_demos(out: &Path) -> PathBuf {
        out.join("demos/heldout")
    }
    pub fn perception_demos(out: &Path) -> PathBuf {
        out.join("demos/perception")
    }
    pub fn model(out: &Path, name: &str) -> PathBuf {
        out.join(format!("models/{name}.json"))
    }
    pub fn model_report(out: &Path, name: &str) -> PathBuf {
        out.join(format!("models/{name}_report.csv"))
    }
    pub fn policy(out: &Path) -> PathBuf {
        out.join("irl/policy.json")
    }
    pub fn reward(out: &Path) -> PathBuf {
        out.join("irl/reward.json")
    }
    pub fn history(out: &Path) -> PathBuf {
        out.join("irl/history.csv")
    }
    pub fn plans(out: &Path) -> PathBuf {
        out.join("baseline/plans.jsonl")
    }
    pub fn episodes(out: &Path) -> PathBuf {
        out.join("pipeline/episodes.jsonl")
    }
    pub fn benchmark(out: &Path) -> PathBuf {
        out.join("pipeline/report.csv")
    }
    pub fn lba(out: &Path) -> PathBuf {
        out.join("eval/lba.csv")
    }
    pub fn gap_fill(out: &Path) -> PathBuf {
        out.join("eval/gap_fill.csv")
    }
    pub fn regression(out: &Path) -> PathBuf {
        out.join("eval/regression.csv")
    }
    pub fn report(out: &Path) -> PathBuf {
        out.join("report.md")
    }
}

pub const MODELS: [&str; 4] = ["keypoint", "object", "human_ik", "restricted_fk"];

/// Files a stage read and wrote, plus lines worth showing the user.
#[derive(Debug, Clone, Default)]
pub struct StageOutput {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub notes: Vec<String>,
}

fn finish(cfg: &RunConfig, stage: &str, t0: Instant, out: StageOutput) -> Result<StageOutput, PipelineError> {
    RunManifest::record(cfg, stage, &out.inputs, &out.outputs, t0.elapsed().as_secs_f64())?;
    Ok(out)
}

fn require(path: &Path, producer: &str) -> Result<(), PipelineError> {
    if path.exists() {
        Ok(())
    } else {
        Err(PipelineError::Validation(format!("{} not found; run `{producer}` first", path.display())))
    }
}

/// Demonstrations in `dir`, in file-name order.
pub fn load_demos(dir: &Path) -> Result<Vec<(PathBuf, Demonstration)>, PipelineError> {
    let missing = || PipelineError::Validation(format!("no demonstrations in {}; run `gen-demos` first", dir.display()));
    let entries = std::fs::read_dir(dir).map_err(|_| missing())?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(missing());
    }
    files
        .into_iter()
        .map(|p| {
            let d = Demonstration::load(&p).map_err(|e| PipelineError::Validation(format!("{}: {e}", p.display())))?;
            Ok((p, d))
        })
        .collect()
}

pub fn gen_demos(cfg: &RunConfig) -> Result<StageOutput, PipelineError> {
    let t0 = Instant::now();
    let robot = cfg.robot_path();
    cfg.load_robot()?;
    let out = cfg.out();
    let mut so = StageOutput {
        inputs: vec![robot],
        ..Default::default()
    };
    let mut failed = Vec::new();
    for (dir, base, n) in [
        (layout::train_demos(&out), cfg.seeds.demos, cfg.demos.count),
        (layout::held_out_demos(&out), cfg.seeds.eval, cfg.demos.held_out),
        (layout::perception_demos(&out), cfg.seeds.perception, cfg.demos.perception),
    ] {
        for i in 0..n {
            let seed = base + i as u64;
            match generate_demonstration(&cfg.task, &cfg.noise, seed) {
                Ok(d) => {
                    let p = dir.join(format!("demo_{i:03}.jsonl"));
                    d.save(&p)?;
                    so.outputs.push(p);
                }
                Err(e) => {
                    log::error!("seed {seed}: {e}");
                    failed.push(seed);
                }
            }
        }
    }
    if !failed.is_empty() {
        return Err(PipelineError::Runtime(format!("generation failed for seeds {failed:?}")));
    }
    so.notes.push(format!(
        "{} training, {} held-out and {} perception demonstrations",
        cfg.demos.count, cfg.demos.held_out, cfg.demos.perception
    ));
    finish(cfg, "gen-demos", t0, so)
}

pub fn train_all(cfg: &RunConfig) -> Result<StageOutput, PipelineError> {
    let t0 = Instant::now();
    let out = cfg.out();
    let mut loaded = load_demos(&layout::train_demos(&out))?;
    if cfg.demos.perception > 0 {
        loaded.extend(load_demos(&layout::perception_demos(&out))?);
    }
    let robot = cfg.load_robot()?;
    let mut so = StageOutput {
        inputs: loaded.iter().map(|(p, _)| p.clone()).collect(),
        ..Default::default()
    };
    so.inputs.push(cfg.robot_path());
    let demos: Vec<Demonstration> = loaded.into_iter().map(|(_, d)| d).collect();
    let seed = cfg.seeds.train;

    let mut save = |name: &str, ck: Checkpoint, report: &crate::perception::PredictorReport| -> Result<(), PipelineError> {
        let (mp, rp) = (layout::model(&out, name), layout::model_report(&out, name));
        ck.save(&mp)?;
        report.write_csv(&rp)?;
        so.outputs.extend([mp, rp]);
        Ok(())
    };

    let (kp, kr, km) = train_keypoint_predictor(&demos, &cfg.keypoints, seed)?;
    save("keypoint", kp.net.to_checkpoint(km), &kr)?;
    let (ob, or, om) = train_object_locator(&demos, &cfg.objects, seed)?;
    save("object", ob.net.to_checkpoint(om), &or)?;
    let (hik, hr, hm) = train_human_ik(&demos, &cfg.human_ik.model, seed)?;
    save("human_ik", hik.to_checkpoint(hm), &hr)?;
    let (fk, fr, fm) = train_restricted_fk(&robot, cfg.restricted_fk.samples, &cfg.restricted_fk.model, seed)?;
    save("restricted_fk", fk.to_checkpoint(fm), &fr)?;

    let mut notes = Vec::new();
    for (name, report, bound) in [("human_ik", &hr, cfg.human_ik.max_rmse), ("restricted_fk", &fr, cfg.restricted_fk.max_rmse)] {
        let worst = report.rows.iter().map(|r| r.rmse).fold(0.0, f64::max);
        notes.push(format!("{name}: worst held-out rmse {worst:.4} m (bound {bound})"));
        if !(worst < bound) {
            finish(cfg, "train-all", t0, so)?;
            return Err(PipelineError::Runtime(format!("{name} failed its held-out bound: rmse {worst:.4} m >= {bound} m")));
        }
    }
    for (name, report) in [("keypoint", &kr), ("object", &or)] {
        let mean = report.rows.iter().map(|r| r.mae).sum::<f64>() / report.rows.len().max(1) as f64;
        notes.push(format!("{name}: mean held-out mae {mean:.4} m over {} predictions", report.eval_predictions));
    }
    so.notes = notes;
    finish(cfg, "train-all", t0, so)
}

#[derive(Debug, Clone, Default)]
pub struct TrainIrlOverrides {
    pub demos: Option<PathBuf>,
    pub iters: Option<usize>,
    pub seed: Option<u64>,
}

fn sorting_only(cfg: &RunConfig, what: &str) -> Result<SortingMdp, PipelineError> {
    if cfg.task.task != Task::Sorting {
        return Err(PipelineError::Validation(format!("{what} is defined for the sorting task only")));
    }
    let mdp = cfg.mdp();
    mdp.validate().map_err(|e| PipelineError::Validation(e.to_string()))?;
    Ok(mdp)
}

pub fn train_irl(cfg: &RunConfig, ov: &TrainIrlOverrides) -> Result<StageOutput, PipelineError> {
    let t0 = Instant::now();
    let mdp = sorting_only(cfg, "train-irl")?;
    let out = cfg.out();
    let dir = ov.demos.clone().unwrap_or_else(|| layout::train_demos(&out));
    let loaded = load_demos(&dir)?;
    let mut airl = cfg.irl.airl.clone();
    airl.iterations = ov.iters.unwrap_or(airl.iterations);
    airl.seed = ov.seed.unwrap_or(cfg.seeds.irl);
    let demos: Vec<Demonstration> = loaded.iter().map(|(_, d)| d.clone()).collect();
    let result = train_airl(&demos, &mdp, &airl).map_err(|e| match e {
        crate::irl::IrlError::InsufficientData(m) | crate::irl::IrlError::InvalidConfig(m) => PipelineError::Validation(m),
        other => PipelineError::Runtime(other.to_string()),
    })?;
    let (pp, rp, hp) = (layout::policy(&out), layout::reward(&out), layout::history(&out));
    result.policy.to_checkpoint(result.policy_meta(&airl)).save(&pp)?;
    result.reward.to_checkpoint(result.reward_meta(&airl)).save(&rp)?;
    write_history_csv(&hp, &result.history)?;
    let mut notes = vec![format!("{} demonstrations, {} iterations", demos.len(), airl.iterations)];
    if let Some(last) = result.history.last() {
        notes.push(format!("final discriminator accuracy {:.3}, mean return {:.3}", last.disc_accuracy, last.mean_return));
    }
    if result.collapse_warning {
        notes.push("warning: discriminator accuracy stayed at 1.0; the policy may have collapsed".into());
    }
    let so = StageOutput {
        inputs: loaded.into_iter().map(|(p, _)| p).collect(),
        outputs: vec![pp, rp, hp],
        notes,
    };
    finish(cfg, "train-irl", t0, so)
}

fn load_policy(out: &Path) -> Result<(GaussianPolicy, PathBuf), PipelineError> {
    let p = layout::policy(out);
    require(&p, "train-irl")?;
    Ok((GaussianPolicy::from_checkpoint(&Checkpoint::load(&p)?)?, p))
}

/// Per-episode measures of one method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    /// Seconds per object handled.
    pub time_s: f64,
    pub jerkiness_deg: f64,
    pub displacement_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    /// `policy` for learned-policy rollouts, `demonstration` otherwise.
    pub source: String,
    pub completed: bool,
    pub frames: usize,
    pub converged_frames: usize,
    /// Frames whose wrist fell outside the human-IK training envelope.
    pub extrapolated_frames: usize,
    pub ours: MethodMetrics,
    pub planner: String,
    pub nodes_expanded: usize,
    pub baseline_frames: usize,
    pub baseline_converged: usize,
    pub baseline: MethodMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PlanRecord {
    episode: usize,
    path: WaypointPath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RunHeader {
    task: Task,
    robot: String,
    episodes: usize,
}

/// The learned policy's mean actions from a fresh scene, until every object
/// is sorted or the step budget runs out.
fn policy_path(policy: &GaussianPolicy, mdp: &SortingMdp, max_steps: usize, seed: u64) -> Result<(Vec<Vec3>, bool), PipelineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = mdp.reset(&mut rng)?;
    let mut path = vec![s.eef];
    while path.len() <= max_steps && !s.all_sorted() {
        let a = policy.mean_action(&mdp.observe(&s).encode(mdp.workspace()))?;
        s = mdp.step(&s, a)?;
        path.push(s.eef);
    }
    Ok((path, s.all_sorted()))
}

struct Episode {
    path: Vec<Vec3>,
    source: &'static str,
    completed: bool,
}

/// Paths to execute: learned-policy rollouts for sorting, held-out
/// demonstrations for pouring (the IRL stage models sorting only).
fn episode_paths(cfg: &RunConfig, inputs: &mut Vec<PathBuf>) -> Result<Vec<Episode>, PipelineError> {
    let out = cfg.out();
    match cfg.task.task {
        Task::Sorting => {
            let mdp = sorting_only(cfg, "run-pipeline")?;
            let (policy, pp) = load_policy(&out)?;
            inputs.push(pp);
            (0..cfg.eval.episodes)
                .map(|ep| {
                    let (path, completed) = policy_path(&policy, &mdp, cfg.eval.max_policy_steps, cfg.seeds.eval + ep as u64)?;
                    Ok(Episode {
                        path,
                        source: "policy",
                        completed,
                    })
                })
                .collect()
        }
        Task::Pouring => {
            let demos = load_demos(&layout::held_out_demos(&out))?;
            if demos.len() < cfg.eval.episodes {
                return Err(PipelineError::Validation(format!(
                    "{} held-out demonstrations, eval.episodes is {}",
                    demos.len(),
                    cfg.eval.episodes
                )));
            }
            Ok(demos
                .into_iter()
                .take(cfg.eval.episodes)
                .map(|(p, d)| {
                    inputs.push(p);
                    Episode {
                        path: d.eef_path(),
                        source: "demonstration",
                        completed: true,
                    }
                })
                .collect())
        }
    }
}

fn baseline_plan(cfg: &RunConfig, scene: &PlanningScene, path: &[Vec3], episode: usize) -> Result<WaypointPath, PipelineError> {
    let pc = PlannerConfig {
        seed: cfg.seeds.planner + episode as u64,
        ..cfg.planner.clone()
    };
    Ok(plan_through(cfg.planner_kind(), &path_corners(path, cfg.eval.corner_angle), scene, &pc)?)
}

fn load_fk(out: &Path, inputs: &mut Vec<PathBuf>) -> Result<RestrictedFk, PipelineError> {
    let p = layout::model(out, "restricted_fk");
    require(&p, "train-all")?;
    inputs.push(p.clone());
    Ok(RestrictedFk::load(&p)?)
}

/// Plans baseline Cartesian paths through the waypoints of the episodes
/// run-pipeline would execute.
pub fn plan_baseline(cfg: &RunConfig) -> Result<StageOutput, PipelineError> {
    let t0 = Instant::now();
    let out = cfg.out();
    let scene = cfg.load_scene()?;
    let mut so = StageOutput::default();
    let episodes = episode_paths(cfg, &mut so.inputs)?;
    let mut records = Vec::with_capacity(episodes.len());
    for (i, ep) in episodes.iter().enumerate() {
        records.push(PlanRecord {
            episode: i,
            path: baseline_plan(cfg, &scene, &ep.path, i)?,
        });
    }
    let nodes: Vec<f64> = records.iter().map(|r| r.path.nodes_expanded as f64).collect();
    so.notes.push(format!(
        "{} plans with {}, nodes expanded {}",
        records.len(),
        cfg.planner_kind(),
        aggregate(&nodes)?
    ));
    let p = layout::plans(&out);
    write_jsonl(
        &p,
        &RunHeader {
            task: cfg.task.task,
            robot: cfg.load_robot()?.name,
            episodes: records.len(),
        },
        &records,
    )?;
    so.outputs.push(p);
    finish(cfg, "plan-baseline", t0, so)
}

fn method_metrics(traj: &JointTrajectory, eef: &[Vec3], objects: usize) -> Result<MethodMetrics, PipelineError> {
    Ok(MethodMetrics {
        time_s: task_time(traj)? / objects.max(1) as f64,
        jerkiness_deg: jerkiness(traj)?,
        displacement_m: displacement(eef)?,
    })
}

fn eef_path(robot: &RobotSpec, frames: impl Iterator<Item = Vec<f64>>) -> Result<Vec<Vec3>, PipelineError> {
    frames.map(|q| Ok(robot.analytic_fk(&q)?.eef)).collect()
}

/// Executes the episodes, retargets them to the cobot, runs the matched
/// baseline and writes the per-episode records and the benchmark table.
pub fn run_pipeline(cfg: &RunConfig) -> Result<StageOutput, PipelineError> {
    let t0 = Instant::now();
    let out = cfg.out();
    let robot = cfg.load_robot()?;
    let scene = cfg.load_scene()?;
    let mut so = StageOutput::default();
    let hp = layout::model(&out, "human_ik");
    require(&hp, "train-all")?;
    so.inputs.push(hp.clone());
    let fk = load_fk(&out, &mut so.inputs)?;
    let rt = Retargeter {
        human_ik: HumanIk::load(&hp)?,
        human: cfg.task.human.clone(),
        map: SymbolicJointMap::facing_demonstrator(&robot),
        fk,
        robot: robot.clone(),
    };
    rt.validate()?;
    let rcfg: &RetargetConfig = &cfg.retarget;
    let episodes = episode_paths(cfg, &mut so.inputs)?;
    let objects = cfg.task.objects_per_episode;
    let dt = cfg.task.dt;
    let mut records = Vec::with_capacity(episodes.len());
    for (i, ep) in episodes.iter().enumerate() {
        let frames = rt.retarget_trajectory(&ep.path, rcfg)?;
        let converged = frames.iter().filter(|f| f.ik.converged).count();
        if converged < frames.len() {
            log::warn!("episode {i}: {} of {} frames did not converge", frames.len() - converged, frames.len());
        }
        let extrapolated = frames.iter().filter(|f| f.extrapolated).count();
        if extrapolated > 0 {
            log::warn!("episode {i}: human IK extrapolated on {extrapolated} of {} frames", frames.len());
        }
        let ours = JointTrajectory::new(frames.iter().map(|f| f.q_full.clone()).collect(), dt)?;
        let ours_eef = eef_path(&robot, frames.iter().map(|f| f.q_full.clone()))?;

        let plan = baseline_plan(cfg, &scene, &ep.path, i)?;
        let base = path_to_joint_trajectory(&plan.points, &rt.fk, &robot, &rcfg.ik, dt, cfg.seeds.planner + i as u64)?;
        let base_eef = eef_path(&robot, base.frames.iter().map(|f| f.q_full.clone()))?;
        records.push(EpisodeRecord {
            episode: i,
            source: ep.source.into(),
            completed: ep.completed,
            frames: frames.len(),
            converged_frames: converged,
            extrapolated_frames: extrapolated,
            ours: method_metrics(&ours, &ours_eef, objects)?,
            planner: plan.planner.to_string(),
            nodes_expanded: plan.nodes_expanded,
            baseline_frames: base.frames.len(),
            baseline_converged: base.frames.iter().filter(|f| f.converged).count(),
            baseline: method_metrics(&base.joints()?, &base_eef, objects)?,
        });
    }

    let ep_path = layout::episodes(&out);
    write_jsonl(
        &ep_path,
        &RunHeader {
            task: cfg.task.task,
            robot: robot.name.clone(),
            episodes: records.len(),
        },
        &records,
    )?;
    let table = benchmark_table(&records, &cfg.planner_kind().to_string())?;
    let tp = layout::benchmark(&out);
    write_atomic(&tp, table.as_bytes())?;
    let n = records.len() as f64;
    let wins = records
        .iter()
        .filter(|r| r.ours.jerkiness_deg < r.baseline.jerkiness_deg && r.ours.displacement_m < r.baseline.displacement_m)
        .count();
    let jr = records.iter().map(|r| r.ours.jerkiness_deg / r.baseline.jerkiness_deg).sum::<f64>() / n;
    let completed = records.iter().filter(|r| r.completed).count();
    so.notes = vec![
        format!("{completed}/{} episodes completed the task", records.len()),
        format!("retargeted beats the baseline on jerkiness and displacement in {wins}/{}", records.len()),
        format!("mean jerkiness ratio (retargeted / baseline) {jr:.3}"),
    ];
    so.outputs.extend([ep_path, tp]);
    finish(cfg, "run-pipeline", t0, so)
}

fn benchmark_table(records: &[EpisodeRecord], planner: &str) -> Result<String, PipelineError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "avg_time", "avg_jerkiness", "avg_displacement", "n"])?;
    for (name, pick) in [
        ("neuro-symbolic", (|r: &EpisodeRecord| r.ours) as fn(&EpisodeRecord) -> MethodMetrics),
        (planner, |r: &EpisodeRecord| r.baseline),
    ] {
        let m: Vec<MethodMetrics> = records.iter().map(pick).collect();
        let t = aggregate(&m.iter().map(|m| m.time_s).collect::<Vec<_>>())?;
        let j = aggregate(&m.iter().map(|m| m.jerkiness_deg).collect::<Vec<_>>())?;
        let d = aggregate(&m.iter().map(|m| m.displacement_m).collect::<Vec<_>>())?;
        w.write_record([name.to_string(), t.to_string(), j.to_string(), d.to_string(), t.n.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| PipelineError::Runtime(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| PipelineError::Runtime(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub lba_percent: Option<f64>,
    pub pairs: usize,
    pub filled_mae: Option<f64>,
    pub zoh_mae: Option<f64>,
}

/// Behavior agreement of the trained policy on held-out demonstrations and
/// gap-filling errors on their dropped frames.
pub fn eval(cfg: &RunConfig) -> Result<(StageOutput, EvalSummary), PipelineError> {
    let t0 = Instant::now();
    let out = cfg.out();
    let held = load_demos(&layout::held_out_demos(&out))?;
    let mut so = StageOutput {
        inputs: held.iter().map(|(p, _)| p.clone()).collect(),
        ..Default::default()
    };
    let demos: Vec<Demonstration> = held.into_iter().map(|(_, d)| d).collect();
    let mut summary = EvalSummary {
        lba_percent: None,
        pairs: 0,
        filled_mae: None,
        zoh_mae: None,
    };

    if cfg.task.task == Task::Sorting {
        let (policy, pp) = load_policy(&out)?;
        so.inputs.push(pp);
        let pairs = expert_pairs(&demos, &cfg.task.layout.workspace);
        let lba = evaluate_lba(&policy, &pairs, cfg.eval.lba_tolerance)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["pairs", "tolerance_m", "lba_percent"])?;
        w.write_record([pairs.len().to_string(), cfg.eval.lba_tolerance.to_string(), lba.to_string()])?;
        let p = layout::lba(&out);
        write_atomic(&p, &w.into_inner().map_err(|e| PipelineError::Runtime(e.to_string()))?)?;
        so.outputs.push(p);
        so.notes.push(format!("LBA {lba:.1}% over {} held-out pairs (tolerance {} m)", pairs.len(), cfg.eval.lba_tolerance));
        summary.lba_percent = Some(lba);
        summary.pairs = pairs.len();
    }

    let (kpp, obp) = (layout::model(&out, "keypoint"), layout::model(&out, "object"));
    require(&kpp, "train-all")?;
    require(&obp, "train-all")?;
    let kp = KeypointPredictor::load(&kpp)?;
    let ob = ObjectLocator::load(&obp)?;
    so.inputs.extend([kpp, obp]);
    let mut rows = csv::Writer::from_writer(Vec::new());
    rows.write_record(["demo", "dropped", "filled_mae", "zoh_mae"])?;
    let (mut pred, mut truth, mut zoh_all) = (Vec::new(), Vec::new(), Vec::new());
    for (i, d) in demos.iter().enumerate() {
        let (filled, rep) = fill_gaps(d, &kp, &ob)?;
        let filled_kp: Vec<_> = filled.frames.iter().map(|f| f.keypoints.expect("filled")).collect();
        let zoh = zero_order_hold(d)?;
        let fm = keypoint_mae(&filled_kp, d, &rep.dropped);
        let zm = keypoint_mae(&zoh, d, &rep.dropped);
        let show = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        rows.write_record([i.to_string(), rep.dropped.len().to_string(), show(fm), show(zm)])?;
        for &t in &rep.dropped {
            for (j, q) in d.frames[t].truth.keypoints.core().iter().enumerate() {
                pred.extend(filled_kp[t].core()[j].iter());
                zoh_all.extend(zoh[t].core()[j].iter());
                truth.extend(q.iter());
            }
        }
    }
    let gp = layout::gap_fill(&out);
    write_atomic(&gp, &rows.into_inner().map_err(|e| PipelineError::Runtime(e.to_string()))?)?;
    so.outputs.push(gp);
    if truth.len() >= 2 {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "mse", "rmse", "mae", "r2"])?;
        for (name, p) in [("filled", &pred), ("zero_order_hold", &zoh_all)] {
            let m = regression_metrics(p, &truth)?;
            w.write_record([name.to_string(), m.mse.to_string(), m.rmse.to_string(), m.mae.to_string(), m.r2.map_or(String::new(), |v| v.to_string())])?;
            if name == "filled" {
                summary.filled_mae = Some(m.mae);
            } else {
                summary.zoh_mae = Some(m.mae);
            }
        }
        let rp = layout::regression(&out);
        write_atomic(&rp, &w.into_inner().map_err(|e| PipelineError::Runtime(e.to_string()))?)?;
        so.outputs.push(rp);
        so.notes.push(format!(
            "dropped-frame keypoint MAE: filled {:.4} m, zero-order hold {:.4} m",
            summary.filled_mae.unwrap_or(f64::NAN),
            summary.zoh_mae.unwrap_or(f64::NAN)
        ));
    } else {
        so.notes.push("no dropped frames in the held-out demonstrations".into());
    }
    Ok((finish(cfg, "eval", t0, so)?, summary))
}

/// Collects the stage outputs that exist into a markdown summary.
pub fn report(cfg: &RunConfig) -> Result<(StageOutput, String), PipelineError> {
    let t0 = Instant::now();
    let out = cfg.out();
    let mut so = StageOutput::default();
    let mut md = String::from("# Run report\n");
    let mut section = |title: &str, p: PathBuf, md: &mut String| -> Result<(), PipelineError> {
        if p.exists() {
            let text = std::fs::read_to_string(&p)?;
            let _ = write!(md, "\n## {title}\n\n`{}`\n\n```\n{}```\n", p.strip_prefix(&out).unwrap_or(&p).display(), text);
            so.inputs.push(p);
        }
        Ok(())
    };
    for name in MODELS {
        section(&format!("Model `{name}` held-out errors"), layout::model_report(&out, name), &mut md)?;
    }
    section("Benchmark", layout::benchmark(&out), &mut md)?;
    section("Behavior agreement", layout::lba(&out), &mut md)?;
    section("Gap filling on dropped frames", layout::regression(&out), &mut md)?;
    let hp = layout::history(&out);
    if hp.exists() {
        let text = std::fs::read_to_string(&hp)?;
        let mut lines = text.lines();
        let head = lines.next().unwrap_or_default();
        let last = lines.last().unwrap_or_default();
        let _ = write!(md, "\n## Adversarial IRL, final iteration\n\n```\n{head}\n{last}\n```\n");
        so.inputs.push(hp);
    }
    if so.inputs.is_empty() {
        return Err(PipelineError::Validation(format!("nothing to report under {}", out.display())));
    }
    let p = layout::report(&out);
    write_atomic(&p, md.as_bytes())?;
    so.outputs.push(p);
    Ok((finish(cfg, "report", t0, so)?, md))
}
