//! Closed-form similarity registration of the shipped landmark fixtures,
//! with the conditioning diagnostic and a scale-mode comparison.
//!
//! ```text
//! cargo run --example register_landmarks -- [model.json] [world.json]
//! ```

use std::path::{Path, PathBuf};

use ventronav::io::load_landmarks;
use ventronav::registration::{detect_degeneracy, estimate_similarity, ScaleMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/fixtures");
    let mut args = std::env::args().skip(1).map(PathBuf::from);
    let model_path = args.next().unwrap_or_else(|| fixtures.join("model_landmarks.json"));
    let world_path = args.next().unwrap_or_else(|| fixtures.join("world_landmarks_noisy.json"));
    let model = load_landmarks(&model_path)?;
    let world = load_landmarks(&world_path)?;

    let d = detect_degeneracy(&model.points())?;
    println!("model configuration: {:?}, condition ratio {:.4}", d.kind, d.condition_ratio);
    println!("covariance eigenvalues (mm²): {:.1?}", d.eigenvalues);

    for (name, mode) in [("fixed", ScaleMode::Fixed), ("bounded", ScaleMode::bounded())] {
        let r = estimate_similarity(&model, &world, mode)?;
        let axis = r.transform.rotation.quaternion().scaled_axis();
        println!(
            "\n[{name}] scale {:.5}, rotation {:.3}° about {:.3?}, RMSE {:.3} mm",
            r.transform.scale,
            axis.norm().to_degrees(),
            axis.try_normalize(0.0).map(|a| [a.x, a.y, a.z]).unwrap_or_default(),
            r.rmse
        );
        for (id, res) in &r.residuals {
            println!("  {:<20} {:6.3} mm", id.label(), res);
        }
    }
    Ok(())
}
