//! Paired comparison on sorting episodes: retargeted demonstrations against
//! an RRT path through the same sub-goals solved waypoint by waypoint.
//!
//!     cargo run --example benchmark -- [episodes]

use std::time::Instant;

use anyhow::Result;
use mimicarm::kinematics::RobotSpec;
use mimicarm::metrics::{displacement, jerkiness, JointTrajectory};
use mimicarm::planners::{path_corners, path_to_joint_trajectory, plan_through, PlannerConfig, PlannerKind, PlanningScene};
use mimicarm::retarget::{train_human_ik, train_restricted_fk, LearnedModelConfig, RetargetConfig, Retargeter, SymbolicJointMap};
use mimicarm::world::{generate_demonstration, NoiseConfig, TaskConfig};

fn main() -> Result<()> {
    let episodes: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(10);
    let task = TaskConfig::default();
    let noise = NoiseConfig { keypoint_noise_std: 0.002, ..Default::default() };
    let robot = RobotSpec::sawyer_like();

    let t0 = Instant::now();
    let demos = (0..40).map(|s| generate_demonstration(&task, &noise, s)).collect::<Result<Vec<_>, _>>()?;
    let (human_ik, hreport, _) = train_human_ik(&demos, &LearnedModelConfig::default(), 0)?;
    let mut fk_cfg = LearnedModelConfig::default();
    fk_cfg.train.max_steps = 10_000;
    let (fk, _, _) = train_restricted_fk(&robot, 20_000, &fk_cfg, 0)?;
    println!("models trained in {:.1?}; human IK elbow x rmse {:.4}", t0.elapsed(), hreport.row("elbow", "x").map_or(f64::NAN, |r| r.rmse));

    let rt = Retargeter { human_ik, human: task.human.clone(), map: SymbolicJointMap::facing_demonstrator(&robot), fk, robot: robot.clone() };
    let cfg = RetargetConfig::default();
    let scene = PlanningScene::from_layout(&task.layout);
    let eef = |q: &[f64]| robot.analytic_fk(q).map(|f| f.eef);
    let (mut wins, mut jr, mut dr) = (0, 0.0, 0.0);
    for ep in 0..episodes {
        let demo = generate_demonstration(&task, &noise, 500 + ep)?;
        let path = demo.eef_path();
        let frames = rt.retarget_trajectory(&path, &cfg)?;
        let conv = frames.iter().filter(|f| f.ik.converged).count();
        let ours = JointTrajectory::new(frames.iter().map(|f| f.q_full.clone()).collect(), task.dt)?;
        let ours_path = frames.iter().map(|f| eef(&f.q_full)).collect::<Result<Vec<_>, _>>()?;

        let plan = plan_through(PlannerKind::Rrt, &path_corners(&path, 0.05), &scene, &PlannerConfig { seed: ep, ..Default::default() })?;
        let base = path_to_joint_trajectory(&plan.points, &rt.fk, &robot, &cfg.ik, task.dt, ep)?;
        let base_path = base.frames.iter().map(|f| eef(&f.q_full)).collect::<Result<Vec<_>, _>>()?;

        let (j1, j2) = (jerkiness(&ours)?, jerkiness(&base.joints()?)?);
        let (d1, d2) = (displacement(&ours_path)?, displacement(&base_path)?);
        wins += (j1 < j2 && d1 < d2) as usize;
        jr += j2 / j1;
        dr += d2 / d1;
        println!("episode {ep}: {conv}/{} converged; jerkiness {j1:.0} vs {j2:.0} deg; displacement {d1:.2} vs {d2:.2} m", frames.len());
    }
    let n = episodes as f64;
    println!("retargeted beats baseline on both measures in {wins}/{episodes}; mean ratios jerkiness {:.2}x displacement {:.2}x", jr / n, dr / n);
    Ok(())
}
