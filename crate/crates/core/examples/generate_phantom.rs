//! Generates a phantom with custom proportions, writes it next to its
//! meshes, and checks the result loads as a scenario.
//!
//! ```text
//! cargo run --example generate_phantom -- <out_dir> [seed]
//! ```

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ventronav::io::{generate_phantom, write_phantom, LoadedScenario, PhantomParams, SCENARIO_FILE};
use ventronav::registration::detect_degeneracy;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().ok_or("usage: generate_phantom <out_dir> [seed]")?);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);

    let params =
        PhantomParams { semi_axes: [85.0, 105.0, 92.0], ventricle_offset_mm: 12.0, ..PhantomParams::default() };
    let mut phantom = generate_phantom(&params, &mut ChaCha8Rng::seed_from_u64(seed));
    phantom.scenario.seed = seed;
    write_phantom(&phantom, &out)?;

    let loaded = LoadedScenario::load(&out.join(SCENARIO_FILE))?;
    let d = detect_degeneracy(&loaded.scenario.model_landmarks.points())?;
    let (lo, hi) = loaded.scene.head_mesh().bounds();
    println!("head extent {:.1?} mm", (hi - lo).as_slice());
    println!("landmarks {:?} (ratio {:.4})", d.kind, d.condition_ratio);
    println!("entry to target {:.1} mm", (loaded.scenario.planned_entry - loaded.scenario.planned_target).norm());
    Ok(())
}
