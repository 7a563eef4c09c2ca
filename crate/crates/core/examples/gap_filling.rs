//! Train the keypoint predictor and object locator, then fill 20%-dropout
//! streams and compare against zero-order hold.
//!
//!     cargo run --example gap_filling -- [train_demos] [steps]

use std::time::Instant;

use anyhow::Result;
use mimicarm::perception::{fill_gaps, keypoint_mae, object_tracking, train_keypoint_predictor, train_object_locator, zero_order_hold, PredictorTrainConfig};
use mimicarm::world::{generate_demonstration, NoiseConfig, TaskConfig};

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let n: u64 = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(200);
    let steps: u64 = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(2000);

    let task = TaskConfig::default();
    let clean = NoiseConfig {
        keypoint_noise_std: 0.002,
        ..Default::default()
    };
    let demos = (0..n).map(|s| generate_demonstration(&task, &clean, s)).collect::<Result<Vec<_>, _>>()?;

    let mut cfg = PredictorTrainConfig::default();
    cfg.train.max_steps = steps;
    let t0 = Instant::now();
    let (kp, report, _) = train_keypoint_predictor(&demos, &cfg, 0)?;
    println!("keypoint model: {} steps in {:.1?}, final loss {:.4}", report.steps, t0.elapsed(), report.final_loss);
    for r in &report.rows {
        println!("  {:8} {}  rmse {:.4}  mae {:.4}", r.target, r.axis, r.rmse, r.mae);
    }

    let t0 = Instant::now();
    let (obj, oreport, _) = train_object_locator(&demos, &cfg, 0)?;
    println!("object model: {} steps in {:.1?}", oreport.steps, t0.elapsed());
    let held: Vec<_> = (1000..1005).map(|s| generate_demonstration(&task, &clean, s)).collect::<Result<_, _>>()?;
    let grasped: Vec<f64> = object_tracking(&obj, &held)?
        .iter()
        .filter(|s| s.grasped)
        .map(|s| (s.predicted - s.actual).abs().mean())
        .collect();
    println!("  grasped-object MAE {:.4} m over {} steps", grasped.iter().sum::<f64>() / grasped.len() as f64, grasped.len());

    let dropout = NoiseConfig {
        dropout_prob: 0.2,
        ..clean
    };
    let mut wins = 0;
    for seed in 0..10 {
        let d = generate_demonstration(&task, &dropout, 2000 + seed)?;
        let (filled, rep) = fill_gaps(&d, &kp, &obj)?;
        let filled_kp: Vec<_> = filled.frames.iter().map(|f| f.keypoints.expect("filled")).collect();
        let (Some(m), Some(z)) = (keypoint_mae(&filled_kp, &d, &rep.dropped), keypoint_mae(&zero_order_hold(&d)?, &d, &rep.dropped)) else {
            continue;
        };
        wins += (m < z) as usize;
        println!("seed {seed}: {} dropped, model MAE {m:.4}, hold MAE {z:.4}", rep.dropped.len());
    }
    println!("model beats hold on {wins}/10 streams");
    Ok(())
}
