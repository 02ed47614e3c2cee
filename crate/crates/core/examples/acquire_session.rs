//! Simulates one walk through the seven landmarks with the calibrated sensor
//! noise and prints every capture.
//!
//! ```text
//! cargo run --example acquire_session -- [seed] [picks] [world_landmarks_out.json]
//! ```

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ventronav::acquisition::simulate_session;
use ventronav::io::{save_landmarks, LoadedScenario};
use ventronav::simulation::NoiseProfile;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);
    let picks: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);
    let out = args.next().map(PathBuf::from);

    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/scenarios/phantom");
    let scenario = LoadedScenario::load(&dir.join("scenario.json"))?;
    let noise = NoiseProfile::calibrated().noise;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let session = simulate_session(
        &scenario.scene,
        &scenario.scenario.camera,
        &noise,
        &mut rng,
        picks,
        scenario.scenario.standoff_mm,
    )?;

    for s in &session.samples {
        let truth = scenario.scene.true_world_landmark(s.landmark);
        println!(
            "{:<20} pixel ({:7.2}, {:7.2})  depth {:7.2} mm  error {:5.2} mm",
            s.landmark.label(),
            s.pixel.u,
            s.pixel.v,
            s.depth,
            (s.point - truth).norm()
        );
    }
    for (id, spread) in &session.spread {
        if picks > 1 {
            println!("{:<20} spread {:.2} mm", id.label(), spread);
        }
    }
    if let Some(p) = out {
        save_landmarks(&session.landmarks, &p)?;
        println!("wrote {}", p.display());
    }
    Ok(())
}
