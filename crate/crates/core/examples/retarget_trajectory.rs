//! Retarget one sorting demonstration onto a bundled cobot: human IK from
//! the wrist, symbolic joint map, then learned-FK refinement per frame.
//!
//!     cargo run --example retarget_trajectory -- [sawyer_like|kuka_like] [demo_seed]

use anyhow::{anyhow, Result};
use mimicarm::kinematics::RobotSpec;
use mimicarm::retarget::{train_human_ik, train_restricted_fk, LearnedModelConfig, RetargetConfig, Retargeter, SymbolicJointMap};
use mimicarm::world::{generate_demonstration, NoiseConfig, TaskConfig};

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let name = args.get(1).map(String::as_str).unwrap_or("sawyer_like");
    let robot = RobotSpec::bundled(name).ok_or_else(|| anyhow!("unknown robot {name}"))?;
    let seed: u64 = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(500);

    let task = TaskConfig::default();
    let noise = NoiseConfig::default();
    let demos = (0..20).map(|s| generate_demonstration(&task, &noise, s)).collect::<Result<Vec<_>, _>>()?;
    let (human_ik, _, _) = train_human_ik(&demos, &LearnedModelConfig::default(), 0)?;
    let mut fk_cfg = LearnedModelConfig::default();
    fk_cfg.train.max_steps = 10_000;
    let (fk, _, _) = train_restricted_fk(&robot, 20_000, &fk_cfg, 0)?;

    let rt = Retargeter {
        human_ik,
        human: task.human.clone(),
        map: SymbolicJointMap::facing_demonstrator(&robot),
        fk,
        robot: robot.clone(),
    };
    let demo = generate_demonstration(&task, &noise, seed)?;
    let path = demo.eef_path();
    let frames = rt.retarget_trajectory(&path, &RetargetConfig::default())?;

    println!("{name}: {} frames from demo {seed}", frames.len());
    println!("frame  wrist (m)                 cobot eef (m)             err (m)  iters  joints (rad)");
    let mut worst: f64 = 0.0;
    for (t, (f, w)) in frames.iter().zip(&path).enumerate() {
        let eef = robot.analytic_fk(&f.q_full)?.eef;
        worst = worst.max(f.ik.final_error);
        if t % 4 == 0 || !f.ik.converged {
            println!(
                "{t:5}  {:<24}  {:<24}  {:.4}  {:5}  {:.2?}",
                format!("{:.3?}", w.as_slice()),
                format!("{:.3?}", eef.as_slice()),
                f.ik.final_error,
                f.ik.iters,
                f.ik.q
            );
        }
    }
    let converged = frames.iter().filter(|f| f.ik.converged).count();
    println!("{converged}/{} frames converged; worst learned-FK error {worst:.4} m", frames.len());
    Ok(())
}
