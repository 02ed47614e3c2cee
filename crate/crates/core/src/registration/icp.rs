use serde::{Deserialize, Serialize};

use super::similarity::fit_raw;
use super::{detect_degeneracy, rms, ConfigurationKind, RegistrationError, ScaleMode};
use crate::geometry::{Point3, SimilarityTransform, TriangleMesh};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcpConfig {
    pub max_iterations: usize,
    /// Stop once an iteration improves the RMSE by less than this (mm).
    pub convergence_tol: f64,
    /// Estimated scale is clamped to the bounds rather than rejected.
    pub scale_mode: ScaleMode,
}

impl Default for IcpConfig {
    fn default() -> Self {
        Self { max_iterations: 50, convergence_tol: 1e-6, scale_mode: ScaleMode::Fixed }
    }
}

impl IcpConfig {
    fn validate(&self) -> Result<(), RegistrationError> {
        if self.max_iterations == 0 {
            return Err(RegistrationError::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(RegistrationError::InvalidConfig("convergence_tol must be positive".into()));
        }
        self.scale_mode.validate()
    }
}

/// What the source points are matched against.
#[derive(Debug, Clone, Copy)]
pub enum IcpTarget<'a> {
    /// Nearest point, lowest index on ties.
    Points(&'a [Point3]),
    /// Closest point on the surface.
    Mesh(&'a TriangleMesh),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcpResult {
    pub transform: SimilarityTransform,
    pub rmse: f64,
    /// Closest-point distance of each source point under the final transform.
    pub residuals: Vec<f64>,
    /// Number of fit steps taken.
    pub iterations: usize,
    /// False when `max_iterations` ran out before the tolerance was met.
    pub converged: bool,
    /// RMSE under the initial transform followed by one entry per accepted step.
    pub rmse_trace: Vec<f64>,
}

/// Iterative closest point refinement of `init`.
///
/// The RMSE trace is non-increasing: a step whose RMSE would rise (only
/// possible through round-off at the fixed point) is discarded and the loop
/// stops.
pub fn icp_refine(
    source: &[Point3],
    target: IcpTarget<'_>,
    init: &SimilarityTransform,
    cfg: &IcpConfig,
) -> Result<IcpResult, RegistrationError> {
    cfg.validate()?;
    if source.is_empty() {
        return Err(RegistrationError::TooFewPoints { needed: 1, got: 0 });
    }
    if let IcpTarget::Points(p) = target {
        if p.is_empty() {
            return Err(RegistrationError::TooFewPoints { needed: 1, got: 0 });
        }
    }
    if source.len() < 3 || detect_degeneracy(source)?.kind == ConfigurationKind::Collinear {
        return Err(RegistrationError::DegenerateConfiguration(ConfigurationKind::Collinear));
    }

    let mut transform = *init;
    let (mut matches, mut residuals) = correspond(source, target, &transform);
    let mut rmse = rms(residuals.iter().copied());
    let mut trace = vec![rmse];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iterations {
        let (candidate, _) = fit_raw(source, &matches).finish(cfg.scale_mode);
        let (next_matches, next_residuals) = correspond(source, target, &candidate);
        let next_rmse = rms(next_residuals.iter().copied());
        iterations += 1;
        if next_rmse > rmse {
            converged = true;
            break;
        }
        let improvement = rmse - next_rmse;
        transform = candidate;
        matches = next_matches;
        residuals = next_residuals;
        rmse = next_rmse;
        trace.push(rmse);
        if improvement < cfg.convergence_tol {
            converged = true;
            break;
        }
    }

    Ok(IcpResult { transform, rmse, residuals, iterations, converged, rmse_trace: trace })
}

fn correspond(source: &[Point3], target: IcpTarget<'_>, t: &SimilarityTransform) -> (Vec<Point3>, Vec<f64>) {
    source
        .iter()
        .map(|p| {
            let q = t.apply(p);
            match target {
                IcpTarget::Mesh(mesh) => {
                    let s = mesh.closest_point(&q);
                    (s.point, s.distance)
                }
                IcpTarget::Points(points) => {
                    let (best, d2) = nearest(points, &q);
                    (points[best], d2.sqrt())
                }
            }
        })
        .unzip()
}

fn nearest(points: &[Point3], q: &Point3) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, p) in points.iter().enumerate() {
        let d2 = (p - q).norm_squared();
        if d2 < best.1 {
            best = (i, d2);
        }
    }
    best
}
