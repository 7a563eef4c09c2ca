use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{cobot_ik_refine, HumanIk, IkOptConfig, IkResult, RestrictedFk, RetargetError, SymbolicJointMap};
use crate::io::{write_atomic, write_jsonl};
use crate::kinematics::{ArmKeypoints, HumanAngles, HumanArmGeometry, RobotSpec};
use crate::metrics::aggregate;
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetargetConfig {
    pub ik: IkOptConfig,
    /// Seed each frame's optimizer from the previous frame's solution.
    pub warm_start: bool,
}

impl Default for RetargetConfig {
    fn default() -> Self {
        RetargetConfig {
            ik: IkOptConfig::default(),
            warm_start: true,
        }
    }
}

/// The trained sub-models and calibration needed to turn wrist positions
/// into joint angles.
#[derive(Debug, Clone)]
pub struct Retargeter {
    pub human_ik: HumanIk,
    pub human: HumanArmGeometry,
    pub map: SymbolicJointMap,
    pub fk: RestrictedFk,
    pub robot: RobotSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub q_full: Vec<f64>,
    pub human_angles: HumanAngles,
    /// Symbolic-map output before refinement (or the warm start).
    pub q_init: [f64; 4],
    pub ik: IkResult,
    pub extrapolated: bool,
}

/// One line of a retarget run file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetargetRecord {
    pub frame: usize,
    pub q_full: Vec<f64>,
    pub converged: bool,
    pub final_error: f64,
    pub iters: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetargetHeader {
    pub robot: String,
    pub frames: usize,
    pub config: RetargetConfig,
}

impl Retargeter {
    pub fn validate(&self) -> Result<(), RetargetError> {
        self.robot.validate()?;
        self.map.validate(&self.robot)
    }

    /// Demonstrator arm angles for a wrist position, via the human IK model.
    pub fn human_angles(&self, wrist: Vec3) -> Result<(HumanAngles, bool), RetargetError> {
        let out = self.human_ik.predict(wrist)?;
        let k = ArmKeypoints {
            hip: out.hip,
            shoulder: out.shoulder,
            elbow: out.elbow,
            wrist,
            index_finger: None,
            thumb: None,
        };
        Ok((self.human.angles_from_keypoints(&k)?, out.extrapolated))
    }

    /// Full pipeline for one wrist target. `q0` overrides the symbolic-map
    /// starting point (used for warm starts).
    pub fn retarget_frame(&self, wrist: Vec3, q0: Option<[f64; 4]>, cfg: &RetargetConfig) -> Result<FrameResult, RetargetError> {
        let (h, extrapolated) = self.human_angles(wrist)?;
        let q_init = match q0 {
            Some(q) => q,
            None => self.map.apply(&self.robot, &h),
        };
        let ik = cobot_ik_refine(&self.fk, &self.robot, &q_init, wrist, &cfg.ik)?;
        if !ik.converged {
            log::warn!("IK did not converge for wrist {:?}: error {:.4} m", wrist.as_slice(), ik.final_error);
        }
        Ok(FrameResult {
            q_full: self.robot.embed(&ik.q),
            human_angles: h,
            q_init,
            ik,
            extrapolated,
        })
    }

    /// Per-frame retargeting of an end-effector path. With warm starts the
    /// start for frame t is the previous solution moved by the symbolic
    /// map's response to the change in human angles.
    pub fn retarget_trajectory(&self, path: &[Vec3], cfg: &RetargetConfig) -> Result<Vec<FrameResult>, RetargetError> {
        if path.len() < 2 {
            return Err(RetargetError::InsufficientData(format!("path has {} points, need 2", path.len())));
        }
        let scale = self.map.scales();
        let mut out: Vec<FrameResult> = Vec::with_capacity(path.len());
        for &wrist in path {
            let q0 = match out.last() {
                Some(prev) if cfg.warm_start => {
                    let (h, _) = self.human_angles(wrist)?;
                    let mut q: [f64; 4] = [0, 1, 2, 3].map(|k| prev.ik.q[k] + scale[k] * (h[k] - prev.human_angles[k]));
                    self.robot.clamp_mapped(&mut q);
                    Some(q)
                }
                _ => None,
            };
            out.push(self.retarget_frame(wrist, q0, cfg)?);
        }
        Ok(out)
    }
}

pub fn records(frames: &[FrameResult]) -> Vec<RetargetRecord> {
    frames
        .iter()
        .enumerate()
        .map(|(i, f)| RetargetRecord {
            frame: i,
            q_full: f.q_full.clone(),
            converged: f.ik.converged,
            final_error: f.ik.final_error,
            iters: f.ik.iters,
        })
        .collect()
}

pub fn write_retarget_jsonl(path: &Path, robot: &RobotSpec, cfg: &RetargetConfig, frames: &[FrameResult]) -> Result<(), RetargetError> {
    let header = RetargetHeader {
        robot: robot.name.clone(),
        frames: frames.len(),
        config: cfg.clone(),
    };
    write_jsonl(path, &header, &records(frames))?;
    Ok(())
}

/// Convergence rate and final-error and iteration statistics as a two-line CSV.
pub fn write_retarget_summary(path: &Path, frames: &[FrameResult]) -> Result<(), RetargetError> {
    let n = frames.len();
    let conv = frames.iter().filter(|f| f.ik.converged).count() as f64 / n.max(1) as f64;
    let errs: Vec<f64> = frames.iter().map(|f| f.ik.final_error).collect();
    let iters: Vec<f64> = frames.iter().map(|f| f.ik.iters as f64).collect();
    let err = aggregate(&errs).map_err(|e| RetargetError::InsufficientData(e.to_string()))?;
    let it = aggregate(&iters).map_err(|e| RetargetError::InsufficientData(e.to_string()))?;
    let max_err = errs.iter().cloned().fold(0.0, f64::max);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["frames", "convergence_rate", "mean_final_error", "max_final_error", "mean_iters", "std_iters"])?;
    w.write_record([
        n.to_string(),
        conv.to_string(),
        err.mean.to_string(),
        max_err.to_string(),
        it.mean.to_string(),
        it.std.unwrap_or(0.0).to_string(),
    ])?;
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    write_atomic(path, &bytes)?;
    Ok(())
}
