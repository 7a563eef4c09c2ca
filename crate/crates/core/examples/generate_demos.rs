//! Generates a handful of sorting demonstrations and prints what the
//! scripted expert did in each.
//!
//!     cargo run --example generate_demos -- [episodes] [dropout]

use anyhow::Result;
use mimicarm::world::{generate_demonstration, NoiseConfig, TaskConfig};

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let episodes: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(10);
    let dropout: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0.2);

    let cfg = TaskConfig::default();
    let noise = NoiseConfig {
        dropout_prob: dropout,
        keypoint_noise_std: 0.005,
        ..Default::default()
    };
    let mut total_rejected = 0;
    for seed in 0..episodes {
        let demo = generate_demonstration(&cfg, &noise, seed)?;
        total_rejected += demo.header.rejected_scenes;
        let last = demo.frames.last().expect("non-empty");
        let labels: Vec<String> = last
            .truth
            .object_locations
            .iter()
            .map(|p| format!("({:.2},{:.2},{:.2})", p.x, p.y, p.z))
            .collect();
        println!(
            "seed {seed:>3}: {} frames, {} dropped, {} rejected scenes, objects end at {}",
            demo.len(),
            demo.dropped_count(),
            demo.header.rejected_scenes,
            labels.join(" ")
        );
    }
    println!("mean rejected scenes per episode: {:.2}", total_rejected as f64 / episodes as f64);
    Ok(())
}
