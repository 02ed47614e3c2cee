//! Monte Carlo harness: many independent end-to-end sessions
//! (acquire, register, place entry, measure TRE) and noise calibration.
//!
//! Every trial draws from its own generator seeded from `(seed, stream,
//! trial)`, and results are collected in trial order, so the output does not
//! depend on the number of worker threads.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::{simulate_session, NoiseModel, VirtualScene};
use crate::geometry::{CameraIntrinsics, Point3};
use crate::io::{IoError, LoadedScenario, TrialMetrics, TrialOutcome, TrialRecord};
use crate::registration::{estimate_similarity, LandmarkId, ScaleMode};

/// Noise profile shipped with the crate.
pub const CALIBRATED_PROFILE_JSON: &str = include_str!("../data/profiles/calibrated.json");

/// Mean landmark RMSE the calibrated profile is tuned to reproduce (mm).
pub const CALIBRATION_TARGET_RMSE_MM: f64 = 2.54;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub noise: NoiseModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationRecord>,
}

/// How a profile's magnitudes were obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub scenario: String,
    /// Relative magnitudes before scaling.
    pub base: NoiseModel,
    pub factor: f64,
    pub target_mean_rmse_mm: f64,
    pub achieved_mean_rmse_mm: f64,
    pub trials: usize,
    pub seed: u64,
    pub picks_per_landmark: usize,
    pub bisection_steps: usize,
}

impl NoiseProfile {
    pub fn calibrated() -> Self {
        serde_json::from_str(CALIBRATED_PROFILE_JSON).expect("shipped profile parses")
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
        let p: NoiseProfile = serde_json::from_str(&text).map_err(|e| IoError::json(path, e))?;
        p.noise.validate().map_err(|m| IoError::Invalid(format!("{}: {m}", path.display())))?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serializes") + "\n"
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub trials: usize,
    pub seed: u64,
    pub picks_per_landmark: usize,
    pub scale_mode: ScaleMode,
    /// Worker threads; `None` uses rayon's default.
    pub workers: Option<usize>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { trials: 1000, seed: 0, picks_per_landmark: 1, scale_mode: ScaleMode::default(), workers: None }
    }
}

/// The fixed parts of a simulated study.
#[derive(Debug, Clone, Copy)]
pub struct Study<'a> {
    pub scene: &'a VirtualScene,
    pub camera: &'a CameraIntrinsics,
    pub standoff_mm: f64,
    pub planned_entry: Point3,
    pub planned_target: Point3,
}

impl<'a> Study<'a> {
    pub fn from_scenario(s: &'a LoadedScenario) -> Self {
        Self {
            scene: &s.scene,
            camera: &s.scenario.camera,
            standoff_mm: s.scenario.standoff_mm,
            planned_entry: s.scenario.planned_entry,
            planned_target: s.scenario.planned_target,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` in stream `stream` of a run seeded with `seed`.
pub fn trial_seed(seed: u64, stream: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ trial)
}

/// Runs one end-to-end session from an explicit generator seed.
pub fn run_trial(
    study: &Study<'_>,
    noise: &NoiseModel,
    picks_per_landmark: usize,
    scale_mode: ScaleMode,
    seed: u64,
) -> TrialOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let acquired =
        match simulate_session(study.scene, study.camera, noise, &mut rng, picks_per_landmark, study.standoff_mm) {
            Ok(s) => s,
            Err(e) => return TrialOutcome::Failed(e.to_string()),
        };
    let reg = match estimate_similarity(study.scene.model_landmarks(), &acquired.landmarks, scale_mode) {
        Ok(r) => r,
        Err(e) => return TrialOutcome::Failed(e.to_string()),
    };
    let truth = study.scene.model_to_world_truth();
    let tre = |p: &Point3| (reg.transform.apply(p) - truth.apply(p)).norm();
    let mut residuals_mm = [0.0; 7];
    for id in LandmarkId::ALL {
        residuals_mm[id.index()] = reg.residuals[&id];
    }
    TrialOutcome::Completed(TrialMetrics {
        rmse_mm: reg.rmse,
        tre_mm: tre(&study.planned_entry),
        target_tre_mm: tre(&study.planned_target),
        scale: reg.transform.scale,
        residuals_mm,
    })
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().expect("thread pool").install(f),
        None => f(),
    }
}

/// Runs `cfg.trials` independent sessions, returned in trial order.
pub fn run_simulation(study: &Study<'_>, noise: &NoiseModel, cfg: &SimulationConfig) -> Vec<TrialRecord> {
    with_pool(cfg.workers, || {
        (0..cfg.trials as u64)
            .into_par_iter()
            .map(|trial| {
                let seed = trial_seed(cfg.seed, noise.stream, trial);
                TrialRecord {
                    trial,
                    seed,
                    outcome: run_trial(study, noise, cfg.picks_per_landmark, cfg.scale_mode, seed),
                }
            })
            .collect()
    })
}

/// Mean RMSE over completed trials, or `None` if every trial failed.
pub fn mean_rmse(records: &[TrialRecord]) -> Option<f64> {
    let v: Vec<f64> = records.iter().filter_map(|r| r.metrics().map(|m| m.rmse_mm)).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOutcome {
    pub factor: f64,
    pub mean_rmse_mm: f64,
    pub steps: usize,
}

/// Finds `k` such that `base.scaled(k)` gives the target mean RMSE.
///
/// Every evaluation reuses the same trial seeds, so the mean is a smooth,
/// increasing function of `k` and bisection converges cleanly.
pub fn calibrate_noise_scale(
    study: &Study<'_>,
    base: &NoiseModel,
    target_mean_rmse_mm: f64,
    cfg: &SimulationConfig,
    rel_tol: f64,
) -> Option<CalibrationOutcome> {
    let eval = |k: f64| mean_rmse(&run_simulation(study, &base.scaled(k), cfg));
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut at_hi = eval(hi)?;
    while at_hi < target_mean_rmse_mm {
        lo = hi;
        hi *= 2.0;
        at_hi = eval(hi)?;
        if hi > 1e3 {
            return None;
        }
    }
    let mut best = CalibrationOutcome { factor: hi, mean_rmse_mm: at_hi, steps: 0 };
    for step in 1..=60 {
        let mid = 0.5 * (lo + hi);
        let m = eval(mid)?;
        best = CalibrationOutcome { factor: mid, mean_rmse_mm: m, steps: step };
        if (m - target_mean_rmse_mm).abs() <= rel_tol * target_mean_rmse_mm {
            break;
        }
        if m < target_mean_rmse_mm {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(best)
}
