//! Tunes the shipped noise profile so the mean landmark RMSE of simulated
//! sessions on the phantom matches the target.
//!
//! ```text
//! cargo run --release --example calibrate_noise -- [trials] [out.json]
//! ```

use std::path::{Path, PathBuf};

use ventronav::acquisition::NoiseModel;
use ventronav::io::LoadedScenario;
use ventronav::simulation::{
    calibrate_noise_scale, CalibrationRecord, NoiseProfile, SimulationConfig, Study, CALIBRATION_TARGET_RMSE_MM,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let trials: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(10_000);
    let out = args.next().map(PathBuf::from);

    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/scenarios/phantom");
    let scenario = LoadedScenario::load(&dir.join("scenario.json"))?;
    let study = Study::from_scenario(&scenario);

    // Relative magnitudes of the error sources; only their common scale is fitted.
    let base = NoiseModel {
        aim_sigma_px: 3.0,
        depth_sigma_mm: 1.5,
        depth_bias_mm: 0.0,
        pose_rot_sigma_deg: 0.2,
        pose_trans_sigma_mm: 1.0,
        stream: 0,
    };
    let cfg = SimulationConfig { trials, seed: 2024, ..SimulationConfig::default() };
    let fit = calibrate_noise_scale(&study, &base, CALIBRATION_TARGET_RMSE_MM, &cfg, 1e-4)
        .ok_or("calibration did not bracket the target")?;
    println!("factor {:.6} -> mean RMSE {:.4} mm after {} steps", fit.factor, fit.mean_rmse_mm, fit.steps);

    let profile = NoiseProfile {
        schema_version: 1,
        name: "calibrated".into(),
        description: format!(
            "Base sensor error ratios scaled so that {trials} simulated sessions on the synthetic phantom give a mean \
             landmark RMSE of {CALIBRATION_TARGET_RMSE_MM} mm. Regenerate with the calibrate_noise example."
        ),
        noise: base.scaled(fit.factor),
        calibration: Some(CalibrationRecord {
            scenario: scenario.id.clone(),
            base,
            factor: fit.factor,
            target_mean_rmse_mm: CALIBRATION_TARGET_RMSE_MM,
            achieved_mean_rmse_mm: fit.mean_rmse_mm,
            trials,
            seed: cfg.seed,
            picks_per_landmark: cfg.picks_per_landmark,
            bisection_steps: fit.steps,
        }),
    };
    match out {
        Some(p) => std::fs::write(&p, profile.to_json())?,
        None => print!("{}", profile.to_json()),
    }
    Ok(())
}
