use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::kinematics::RobotSpec;
use crate::metrics::{JointTrajectory, MetricsError};
use crate::retarget::{cobot_ik_refine, IkOptConfig, RestrictedFk, RetargetError};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineFrame {
    pub q_full: Vec<f64>,
    pub converged: bool,
    pub final_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineTrajectory {
    pub frames: Vec<BaselineFrame>,
    pub dt: f64,
}

impl BaselineTrajectory {
    pub fn joints(&self) -> Result<JointTrajectory, MetricsError> {
        JointTrajectory::new(self.frames.iter().map(|f| f.q_full.clone()).collect(), self.dt)
    }
}

/// Joint-space version of a planned Cartesian path, solved the way a
/// planner-driven controller would: each waypoint independently, from a
/// random seed inside the limits, with no adjustment penalty.
pub fn path_to_joint_trajectory(
    path: &[Vec3],
    fk: &RestrictedFk,
    robot: &RobotSpec,
    ik: &IkOptConfig,
    dt: f64,
    seed: u64,
) -> Result<BaselineTrajectory, RetargetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lim = robot.mapped_limits();
    let cfg = IkOptConfig { alpha: 0.0, ..ik.clone() };
    let mut frames = Vec::with_capacity(path.len());
    for &p in path {
        let q0 = lim.map(|(lo, hi)| rng.gen_range(lo..=hi));
        let r = cobot_ik_refine(fk, robot, &q0, p, &cfg)?;
        frames.push(BaselineFrame {
            q_full: robot.embed(&r.q),
            converged: r.converged,
            final_error: r.final_error,
        });
    }
    Ok(BaselineTrajectory { frames, dt })
}
