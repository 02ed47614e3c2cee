//! Drives one in-process session through the whole workflow: seven
//! landmarks, registration, entry point with TRE, then a catheter advanced
//! along the plan with live tip feedback.
//!
//! ```text
//! cargo run --example guidance_walkthrough -- [seed]
//! ```

use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ventronav::acquisition::simulate_session;
use ventronav::guidance::MarkerPose;
use ventronav::io::LoadedScenario;
use ventronav::registration::ScaleMode;
use ventronav::session::{walkthrough_script, Session, SessionEvent};
use ventronav::simulation::NoiseProfile;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(3);
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/scenarios/phantom");
    let scenario = LoadedScenario::load(&dir.join("scenario.json"))?;
    let ctx = Arc::new(scenario.session_context(ScaleMode::bounded()));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = simulate_session(
        &scenario.scene,
        &scenario.scenario.camera,
        &NoiseProfile::calibrated().noise,
        &mut rng,
        1,
        scenario.scenario.standoff_mm,
    )?;
    let script = walkthrough_script(&ctx, &picks.landmarks, 0.0);

    let mut session = Session::new(ctx);
    for event in &script {
        if let SessionEvent::MarkerUpdate { .. } = event {
            break;
        }
        let before = session.state().prompt();
        let effect = session.apply(event.clone())?;
        println!("{:<14} {:<22} -> {}", event.kind(), before, effect.prompt);
        if let Some(r) = effect.rmse {
            println!("{:>14} registration RMSE {r:.3} mm, scale {:.4}", "", effect.scale.unwrap_or(1.0));
        }
        if let Some(t) = effect.tre_mm {
            println!("{:>14} TRE at the planned entry {t:.3} mm", "");
        }
    }

    // Advance the catheter along the scripted pose in 10 mm steps.
    let Some(SessionEvent::MarkerUpdate { pose }) = script.last() else { unreachable!() };
    let axis = pose.rotation.rotate(session.context().catheter.offset()).normalize();
    println!("\n depth(mm)  deviation  to-ventricle  inside  remaining");
    for step in 0..=7 {
        let shifted = MarkerPose::new(pose.rotation, pose.translation + axis * (10.0 * step as f64));
        let effect = session.apply(SessionEvent::MarkerUpdate { pose: shifted })?;
        let fb = effect.tip_feedback.expect("tracking phase reports feedback");
        println!(
            " {:9.1} {:10.2} {:13.2} {:>7} {:10.1}",
            fb.depth_along_plan,
            fb.deviation_from_plan,
            fb.distance_to_ventricle,
            fb.inside.map_or("?".to_string(), |b| b.to_string()),
            fb.remaining_to_target
        );
    }
    Ok(())
}
