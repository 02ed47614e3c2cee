//! Patient-to-image registration.
//!
//! Landmark correspondences are known by name, so the session workflow uses
//! the closed-form fit in [`estimate_similarity`]. [`icp_refine`] alternates
//! closest-point matching with the same fit for correspondence-free, dense
//! alignment against a surface or point cloud.

mod degeneracy;
mod icp;
mod landmarks;
mod similarity;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use degeneracy::{detect_degeneracy, ConfigurationKind, Degeneracy, FLAT_RATIO};
pub use icp::{icp_refine, IcpConfig, IcpResult, IcpTarget};
pub use landmarks::{LandmarkId, LandmarkSet, Space};

use crate::geometry::{Point3, SimilarityTransform, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegistrationError {
    #[error("landmark sets do not cover the same seven landmarks (missing: {missing:?})")]
    IncompleteCorrespondence { missing: Vec<LandmarkId> },
    #[error("landmark configuration is {0:?}; registration is ill-posed")]
    DegenerateConfiguration(ConfigurationKind),
    #[error("estimated scale {scale:.4} outside [{min}, {max}]; check for a mis-picked landmark")]
    ScaleOutOfBounds { scale: f64, min: f64, max: f64 },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// How the fit treats scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ScaleMode {
    /// Rigid fit, scale held at 1.
    Fixed,
    /// Scale estimated from the variance ratio and required to fall in `[min, max]`.
    Estimated { min: f64, max: f64 },
}

impl ScaleMode {
    pub const DEFAULT_BOUNDS: (f64, f64) = (0.9, 1.1);

    /// Estimated scale within the default `[0.9, 1.1]` bounds.
    pub fn bounded() -> Self {
        ScaleMode::Estimated { min: Self::DEFAULT_BOUNDS.0, max: Self::DEFAULT_BOUNDS.1 }
    }

    /// Estimated scale with no practical bounds.
    pub fn unbounded() -> Self {
        ScaleMode::Estimated { min: f64::MIN_POSITIVE, max: f64::MAX }
    }

    pub(crate) fn validate(&self) -> Result<(), RegistrationError> {
        match *self {
            ScaleMode::Fixed => Ok(()),
            ScaleMode::Estimated { min, max } if min > 0.0 && min <= 1.0 && max >= 1.0 => Ok(()),
            ScaleMode::Estimated { min, max } => Err(RegistrationError::InvalidConfig(format!(
                "scale bounds [{min}, {max}] must be positive and contain 1"
            ))),
        }
    }
}

impl Default for ScaleMode {
    fn default() -> Self {
        Self::bounded()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum ScaleOutcome {
    Fixed,
    Estimated,
    Clamped { unclamped: f64 },
}

/// Fitted model→world transform with its landmark residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationResult {
    pub transform: SimilarityTransform,
    /// Root-mean-square landmark residual (mm).
    pub rmse: f64,
    /// Per-landmark residual distance ‖T(model) − world‖ (mm).
    pub residuals: BTreeMap<LandmarkId, f64>,
    /// Conditioning of the model landmark configuration.
    pub condition: Degeneracy,
    /// 1 for the closed-form fit.
    pub iterations: usize,
}

/// Closed-form least-squares similarity fit of `model` onto `world`.
///
/// The fitted transform maps the model-landmark mean onto the world-landmark
/// centroid, and its rotation is always proper.
pub fn estimate_similarity(
    model: &LandmarkSet,
    world: &LandmarkSet,
    scale_mode: ScaleMode,
) -> Result<RegistrationResult, RegistrationError> {
    scale_mode.validate()?;
    let (src, dst) = paired(model, world)?;
    let condition = detect_degeneracy(&src)?;
    if condition.kind == ConfigurationKind::Collinear {
        return Err(RegistrationError::DegenerateConfiguration(ConfigurationKind::Collinear));
    }
    if detect_degeneracy(&dst)?.kind == ConfigurationKind::Collinear {
        return Err(RegistrationError::DegenerateConfiguration(ConfigurationKind::Collinear));
    }
    let raw = similarity::fit_raw(&src, &dst);
    let (transform, outcome) = raw.finish(scale_mode);
    if let (ScaleOutcome::Clamped { unclamped }, ScaleMode::Estimated { min, max }) = (outcome, scale_mode) {
        return Err(RegistrationError::ScaleOutOfBounds { scale: unclamped, min, max });
    }
    let residuals: BTreeMap<LandmarkId, f64> =
        model.iter().map(|(id, q)| (id, (transform.apply(q) - world.get(id).expect("paired")).norm())).collect();
    let rmse = rms(residuals.values().copied());
    Ok(RegistrationResult { transform, rmse, residuals, condition, iterations: 1 })
}

/// `sqrt(mean ‖T(model_i) − world_i‖²)` over the seven landmarks.
pub fn compute_rmse(
    t: &SimilarityTransform,
    model: &LandmarkSet,
    world: &LandmarkSet,
) -> Result<f64, RegistrationError> {
    let (src, dst) = paired(model, world)?;
    Ok(rms(src.iter().zip(&dst).map(|(q, p)| (t.apply(q) - p).norm())))
}

/// Centroid of repeated picks of one landmark with its RMS spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PickAggregate {
    pub centroid: Point3,
    /// RMS distance of the picks from their centroid (mm).
    pub spread: f64,
    pub count: usize,
}

/// Component-wise mean of the picks and their RMS spread. `None` for no picks.
pub fn aggregate_repeated_picks(picks: &[Point3]) -> Option<PickAggregate> {
    if picks.is_empty() {
        return None;
    }
    let n = picks.len() as f64;
    let mean: Vec3 = picks.iter().map(|p| p.coords).sum::<Vec3>() / n;
    let centroid = Point3::from(mean);
    let spread = rms(picks.iter().map(|p| (p - centroid).norm()));
    Some(PickAggregate { centroid, spread, count: picks.len() })
}

pub(crate) fn rms(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

fn paired(model: &LandmarkSet, world: &LandmarkSet) -> Result<(Vec<Point3>, Vec<Point3>), RegistrationError> {
    let mut missing = model.missing();
    for id in world.missing() {
        if !missing.contains(&id) {
            missing.push(id);
        }
    }
    if !missing.is_empty() {
        missing.sort();
        return Err(RegistrationError::IncompleteCorrespondence { missing });
    }
    let src = LandmarkId::ALL.iter().map(|&id| *model.get(id).expect("complete")).collect();
    let dst = LandmarkId::ALL.iter().map(|&id| *world.get(id).expect("complete")).collect();
    Ok((src, dst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rotation;

    fn model() -> LandmarkSet {
        LandmarkSet::from_ordered(
            Space::Model,
            [
                Point3::new(-75.0, 5.0, -25.0),
                Point3::new(-45.0, 80.0, 5.0),
                Point3::new(-15.0, 95.0, 3.0),
                Point3::new(0.0, 100.0, 10.0),
                Point3::new(15.0, 95.0, 3.0),
                Point3::new(45.0, 80.0, 5.0),
                Point3::new(75.0, 5.0, -25.0),
            ],
        )
    }

    #[test]
    fn identical_sets_give_identity() {
        let m = model();
        let w = m.transformed(&SimilarityTransform::identity(), Space::World);
        let r = estimate_similarity(&m, &w, ScaleMode::bounded()).unwrap();
        assert!((r.transform.scale - 1.0).abs() < 1e-12);
        assert!(r.transform.rotation.angle() < 1e-9);
        assert!(r.transform.translation.norm() < 1e-9);
        assert!(r.rmse < 1e-12);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn incomplete_correspondence() {
        let m = model();
        let mut w = m.transformed(&SimilarityTransform::identity(), Space::World);
        w.remove(LandmarkId::LeftTragus);
        match estimate_similarity(&m, &w, ScaleMode::Fixed) {
            Err(RegistrationError::IncompleteCorrespondence { missing }) => {
                assert_eq!(missing, vec![LandmarkId::LeftTragus])
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn collinear_rejected() {
        let line =
            LandmarkSet::from_ordered(Space::Model, std::array::from_fn(|i| Point3::new(i as f64 * 10.0, 0.0, 0.0)));
        let w = line.transformed(&SimilarityTransform::identity(), Space::World);
        assert!(matches!(
            estimate_similarity(&line, &w, ScaleMode::Fixed),
            Err(RegistrationError::DegenerateConfiguration(ConfigurationKind::Collinear))
        ));
    }

    #[test]
    fn gross_scale_flagged() {
        let m = model();
        let t = SimilarityTransform::new(1.3, Rotation::identity(), Vec3::zeros()).unwrap();
        let w = m.transformed(&t, Space::World);
        assert!(matches!(
            estimate_similarity(&m, &w, ScaleMode::bounded()),
            Err(RegistrationError::ScaleOutOfBounds { .. })
        ));
        let r = estimate_similarity(&m, &w, ScaleMode::unbounded()).unwrap();
        assert!((r.transform.scale - 1.3).abs() < 1e-12);
    }

    #[test]
    fn rmse_of_two_residuals() {
        let m = model();
        let mut w = m.transformed(&SimilarityTransform::identity(), Space::World);
        // Residuals 3 and 4 on two landmarks, zero elsewhere: sqrt((9+16)/7).
        let p = *w.get(LandmarkId::NoseBridge).unwrap();
        w.insert(LandmarkId::NoseBridge, p + Vec3::new(3.0, 0.0, 0.0));
        let p = *w.get(LandmarkId::LeftTragus).unwrap();
        w.insert(LandmarkId::LeftTragus, p + Vec3::new(0.0, 4.0, 0.0));
        let r = compute_rmse(&SimilarityTransform::identity(), &m, &w).unwrap();
        assert!((r - (25.0f64 / 7.0).sqrt()).abs() < 1e-12);
        // Two-landmark case from the definition directly.
        assert!((rms([3.0, 4.0]) - 12.5f64.sqrt()).abs() < 1e-12);
        assert!((rms([3.0, 4.0]) - 3.53553).abs() < 1e-5);
    }

    #[test]
    fn picks_aggregate() {
        let one = aggregate_repeated_picks(&[Point3::new(1.0, 2.0, 3.0)]).unwrap();
        assert_eq!(one.centroid, Point3::new(1.0, 2.0, 3.0));
        assert_eq!(one.spread, 0.0);
        let two = aggregate_repeated_picks(&[Point3::origin(), Point3::new(2.0, 0.0, 0.0)]).unwrap();
        assert_eq!(two.centroid, Point3::new(1.0, 0.0, 0.0));
        assert!((two.spread - 1.0).abs() < 1e-15);
        assert!(aggregate_repeated_picks(&[]).is_none());
    }

    #[test]
    fn landmark_order_saturates() {
        assert_eq!(LandmarkId::RightTragus.prev(), LandmarkId::RightTragus);
        assert_eq!(LandmarkId::LeftTragus.next(), LandmarkId::LeftTragus);
        assert_eq!(LandmarkId::NoseBridge.next(), LandmarkId::LeftInnerCanthus);
        assert_eq!("left-outer-canthus".parse::<LandmarkId>().unwrap(), LandmarkId::LeftOuterCanthus);
    }

    #[test]
    fn bad_scale_bounds_rejected() {
        let m = model();
        let w = m.transformed(&SimilarityTransform::identity(), Space::World);
        let mode = ScaleMode::Estimated { min: 1.05, max: 1.2 };
        assert!(matches!(estimate_similarity(&m, &w, mode), Err(RegistrationError::InvalidConfig(_))));
    }
}
