//! RRT and RRT-connect between random workspace points, with and without a
//! box obstacle in the way, then through the corners of a pouring
//! demonstration.
//!
//!     cargo run --example plan_baselines -- [queries]

use anyhow::Result;
use mimicarm::planners::{path_corners, plan, plan_through, PlannerConfig, PlannerKind, PlanningScene};
use mimicarm::world::{generate_demonstration, Aabb, Layout, NoiseConfig, TaskConfig};
use mimicarm::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let queries: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(50);
    let layout = Layout::default();
    let open = PlanningScene::from_layout(&layout);
    let mut blocked = open.clone();
    blocked.obstacles.push(Aabb {
        min: Vec3::new(0.4, -0.1, 0.05),
        max: Vec3::new(0.5, 0.1, 0.35),
    });

    for (label, scene) in [("open", &open), ("one obstacle", &blocked)] {
        for kind in [PlannerKind::Rrt, PlannerKind::RrtConnect] {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let (mut solved, mut nodes, mut stretch) = (0, 0, 0.0);
            for i in 0..queries {
                let (a, b) = loop {
                    let a = sample(&mut rng, &layout.workspace);
                    let b = sample(&mut rng, &layout.workspace);
                    if scene.point_free(&a) && scene.point_free(&b) && (a - b).norm() > 0.2 {
                        break (a, b);
                    }
                };
                let cfg = PlannerConfig { seed: i as u64, ..Default::default() };
                if let Ok(p) = plan(kind, a, b, scene, &cfg) {
                    solved += 1;
                    nodes += p.nodes_expanded;
                    stretch += p.length() / (b - a).norm();
                }
            }
            let s = solved.max(1) as f64;
            println!(
                "{label:>12} {kind:<11} solved {solved}/{queries}, mean nodes {:.0}, path / straight line {:.2}",
                nodes as f64 / s,
                stretch / s
            );
        }
    }

    let demo = generate_demonstration(&TaskConfig::pouring(), &NoiseConfig::default(), 5)?;
    let path = demo.eef_path();
    let corners = path_corners(&path, 0.05);
    let p = plan_through(PlannerKind::RrtConnect, &corners, &open, &PlannerConfig::default())?;
    let demo_len: f64 = path.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    println!(
        "pouring demo: {} frames, {} corners; rrt-connect path {:.3} m vs demonstrated {:.3} m",
        path.len(),
        corners.len(),
        p.length(),
        demo_len
    );
    Ok(())
}

fn sample(rng: &mut ChaCha8Rng, b: &Aabb) -> Vec3 {
    Vec3::from_fn(|k, _| rng.gen_range(b.min[k]..b.max[k]))
}
