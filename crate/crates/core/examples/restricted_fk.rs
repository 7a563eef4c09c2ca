//! Learn the restricted forward kinematics of a bundled arm from its analytic
//! oracle, then invert it with the penalized refiner.
//!
//!     cargo run --example restricted_fk -- [sawyer_like|kuka_like] [samples] [steps]

use std::time::Instant;

use anyhow::{anyhow, Result};
use mimicarm::kinematics::RobotSpec;
use mimicarm::retarget::{cobot_ik_refine, train_restricted_fk, IkOptConfig, LearnedModelConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let name = args.get(1).map(String::as_str).unwrap_or("sawyer_like");
    let robot = RobotSpec::bundled(name).ok_or_else(|| anyhow!("unknown robot {name}"))?;
    let n: usize = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(20_000);
    let steps: u64 = args.get(3).map(|s| s.parse()).transpose()?.unwrap_or(20_000);

    let mut cfg = LearnedModelConfig::default();
    cfg.train.max_steps = steps;
    let t0 = Instant::now();
    let (fk, report, _) = train_restricted_fk(&robot, n, &cfg, 0)?;
    println!("{name}: trained on {n} samples, {steps} steps in {:.1?}", t0.elapsed());
    for r in &report.rows {
        println!("  held-out {} rmse {:.4} m", r.axis, r.rmse);
    }

    let lim = robot.mapped_limits();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let ik = IkOptConfig::default();
    let (mut conv, mut oracle_err, mut iters) = (0, 0.0, 0);
    let t0 = Instant::now();
    for _ in 0..200 {
        let q_goal = lim.map(|(lo, hi)| rng.gen_range(lo..=hi));
        let q0 = lim.map(|(lo, hi)| rng.gen_range(lo..=hi));
        let target = robot.restricted_fk_oracle(&q_goal);
        let r = cobot_ik_refine(&fk, &robot, &q0, target, &ik)?;
        conv += r.converged as usize;
        oracle_err += (robot.restricted_fk_oracle(&r.q) - target).norm();
        iters += r.iters;
    }
    println!(
        "IK: {conv}/200 converged in {:.1?}, mean {} iterations, mean true error {:.4} m",
        t0.elapsed(),
        iters / 200,
        oracle_err / 200.0
    );

    let mut closer = 0;
    for _ in 0..100 {
        let q0 = lim.map(|(lo, hi)| rng.gen_range(lo..=hi));
        let p0 = robot.restricted_fk_oracle(&q0);
        let target = loop {
            let q = lim.map(|(lo, hi)| rng.gen_range(lo..=hi));
            let p = robot.restricted_fk_oracle(&q);
            if ((p - p0).norm() - 0.3).abs() < 0.05 {
                break p;
            }
        };
        let dist = |alpha: f64| -> Result<f64> {
            let r = cobot_ik_refine(&fk, &robot, &q0, target, &IkOptConfig { alpha, ..ik.clone() })?;
            Ok(r.q.iter().zip(&q0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        };
        closer += (dist(0.0005)? < dist(0.0)?) as usize;
    }
    println!("penalty keeps the solution closer to q0 in {closer}/100 paired trials");
    Ok(())
}
