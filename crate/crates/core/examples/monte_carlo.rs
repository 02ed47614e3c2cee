//! Monte Carlo study on the phantom: landmark RMSE and TRE as the sensor
//! noise is scaled, and the effect of averaging repeated picks.
//!
//! ```text
//! cargo run --release --example monte_carlo -- [trials]
//! ```

use std::path::Path;

use ventronav::io::{summarize, LoadedScenario};
use ventronav::simulation::{run_simulation, NoiseProfile, SimulationConfig, Study};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trials: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(5000);
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/scenarios/phantom");
    let scenario = LoadedScenario::load(&dir.join("scenario.json"))?;
    let study = Study::from_scenario(&scenario);
    let noise = NoiseProfile::calibrated().noise;

    println!("noise  picks  RMSE mean ± sd   TRE mean  TRE<5mm  failed");
    for (k, picks) in [(0.5, 1), (1.0, 1), (1.0, 5), (2.0, 1), (4.0, 1)] {
        let cfg = SimulationConfig { trials, seed: 7, picks_per_landmark: picks, ..SimulationConfig::default() };
        let s = summarize(&run_simulation(&study, &noise.scaled(k), &cfg));
        let rmse = s.rmse_mm.as_ref().map_or((f64::NAN, f64::NAN), |r| (r.mean, r.sd));
        println!(
            "{k:5.1} {picks:6} {:8.3} ± {:5.3} {:9.3} {:8.3} {:7}",
            rmse.0,
            rmse.1,
            s.tre_mm.as_ref().map_or(f64::NAN, |t| t.mean),
            s.fraction_tre_under_threshold,
            s.failed
        );
    }
    println!("reference RMSE {:.2} ± {:.2} mm", 2.54, 0.46);
    Ok(())
}
