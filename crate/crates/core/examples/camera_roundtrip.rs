//! Pixel and depth to world coordinates and back for the default depth
//! camera, and what the literal millimetre scaling does to the result.
//!
//!     cargo run --example camera_roundtrip

use anyhow::Result;
use mimicarm::world::{CameraModel, Layout};
use mimicarm::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let cam = CameraModel::default();
    let layout = Layout::default();
    println!("camera-to-world axes:\n{}", cam.permutation_matrix());

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (lo, hi) = (layout.conveyor.min, layout.conveyor.max);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let w = Vec3::from_fn(|k, _| if lo[k] < hi[k] { rng.gen_range(lo[k]..hi[k]) } else { lo[k] });
        let px = cam.world_to_pixel(w)?;
        let back = cam.pixel_to_world(&px)?;
        worst = worst.max((back - w).norm());
        if i < 3 {
            println!("world {:.3?} -> pixel ({:.1}, {:.1}) at {:.0} mm -> {:.3?}", w.as_slice(), px.x, px.y, px.z_mm, back.as_slice());
        }
    }
    println!("worst round-trip error over 1000 conveyor points: {worst:.2e} m");

    let literal = CameraModel {
        literal_depth_units: true,
        ..cam.clone()
    };
    let w = layout.home;
    let px = cam.world_to_pixel(w)?;
    let off = literal.pixel_to_world(&px)?;
    println!(
        "literal millimetre scaling moves {:.3?} to {:.3?} ({:.1} m away)",
        w.as_slice(),
        off.as_slice(),
        (off - w).norm()
    );
    Ok(())
}
