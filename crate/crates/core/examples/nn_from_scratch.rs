//! The bundled network engine on two toy problems: a dense regressor for
//! sin(x) and an LSTM that keeps a running sum, plus a checkpoint round trip.
//!
//!     cargo run --example nn_from_scratch -- [steps]

use anyhow::Result;
use mimicarm::nn::{fit, Checkpoint, Model, ModelSpec, SequenceSample, TrainConfig, TrainingMeta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let steps: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(4000);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = TrainConfig {
        max_steps: steps,
        learning_rate: 3e-3,
        ..TrainConfig::default()
    };

    let sine: Vec<SequenceSample> = (0..512)
        .map(|_| {
            let x: f64 = rng.gen_range(-3.0..3.0);
            SequenceSample::single(vec![x], vec![x.sin()])
        })
        .collect();
    let mut dense = Model::new(ModelSpec::stacked(1, &[], &[32, 32], 1, 0)?)?;
    let out = fit(&mut dense, &sine, &cfg)?;
    let worst = (0..61)
        .map(|i| -3.0 + 0.1 * i as f64)
        .map(|x| Ok((dense.predict(&[x])?[0] - f64::sin(x)).abs()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    println!("dense sin(x): final loss {:.2e}, worst error on a grid {worst:.3}", out.final_loss);

    // Target at every step is the sum of the inputs so far.
    let sums: Vec<SequenceSample> = (0..256)
        .map(|_| {
            let xs: Vec<f64> = (0..8).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let mut acc = 0.0;
            SequenceSample {
                inputs: xs.iter().map(|&x| vec![x]).collect(),
                targets: xs.iter().map(|&x| {
                    acc += x;
                    Some(vec![acc])
                }).collect(),
            }
        })
        .collect();
    let mut lstm = Model::new(ModelSpec::stacked(1, &[16], &[], 1, 0)?)?;
    let out = fit(&mut lstm, &sums, &TrainConfig { batch_size: 16, ..cfg.clone() })?;
    let probe = [0.3, -0.1, 0.4, 0.2, -0.5, 0.1];
    let (pred, _) = lstm.forward_sequence(&probe.iter().map(|&x| vec![x]).collect::<Vec<_>>())?;
    println!("lstm running sum: final loss {:.2e}", out.final_loss);
    let mut acc = 0.0;
    for (x, p) in probe.iter().zip(&pred) {
        acc += x;
        println!("  x {x:5.2}  sum {acc:5.2}  predicted {:5.2}", p[0]);
    }

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("lstm.json");
    let meta = TrainingMeta {
        steps: out.steps,
        final_loss: out.final_loss,
        config: cfg,
    };
    Checkpoint::new(&lstm, meta).save(&path)?;
    let back = Checkpoint::load(&path)?.model()?;
    let same = back.params() == lstm.params();
    println!("checkpoint {} restores identical parameters: {same}", path.display());
    Ok(())
}
