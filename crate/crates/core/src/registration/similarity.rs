//! Closed-form least-squares similarity fit between paired point lists.

use nalgebra::{Matrix3, Vector3};

use super::{ScaleMode, ScaleOutcome};
use crate::geometry::{Point3, Rotation, SimilarityTransform, Vec3};

/// Result of the unconstrained fit before any scale policy is applied.
pub(crate) struct RawFit {
    pub rotation: Rotation,
    pub optimal_scale: f64,
    pub source_mean: Vec3,
    pub target_mean: Vec3,
}

/// SVD of the centred cross-covariance with the determinant-sign correction.
///
/// Caller guarantees `source.len() == target.len() >= 1`.
pub(crate) fn fit_raw(source: &[Point3], target: &[Point3]) -> RawFit {
    let n = source.len() as f64;
    let source_mean: Vec3 = source.iter().map(|p| p.coords).sum::<Vec3>() / n;
    let target_mean: Vec3 = target.iter().map(|p| p.coords).sum::<Vec3>() / n;

    let mut cov = Matrix3::<f64>::zeros();
    let mut source_var = 0.0;
    for (q, p) in source.iter().zip(target) {
        let qc = q.coords - source_mean;
        let pc = p.coords - target_mean;
        cov += pc * qc.transpose();
        source_var += qc.norm_squared();
    }
    cov /= n;
    source_var /= n;

    let svd = cov.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let mut d = Vector3::new(1.0, 1.0, 1.0);
    if u.determinant() * v_t.determinant() < 0.0 {
        // Smallest singular value sits last in nalgebra's sorted output.
        let k = svd.singular_values.imin();
        d[k] = -1.0;
    }
    let r = u * Matrix3::from_diagonal(&d) * v_t;
    let trace: f64 = svd.singular_values.component_mul(&d).sum();
    let optimal_scale = if source_var > 0.0 { trace / source_var } else { 1.0 };

    let rot = nalgebra::Rotation3::from_matrix_unchecked(r);
    RawFit {
        rotation: Rotation::from_quaternion(nalgebra::UnitQuaternion::from_rotation_matrix(&rot)),
        optimal_scale,
        source_mean,
        target_mean,
    }
}

impl RawFit {
    /// Applies the scale policy. With bounds, the scale is clamped (which is
    /// still the constrained optimum since the cost is quadratic in scale for
    /// the fitted rotation) and the outcome records whether clamping happened.
    pub fn finish(&self, mode: ScaleMode) -> (SimilarityTransform, ScaleOutcome) {
        let (scale, outcome) = match mode {
            ScaleMode::Fixed => (1.0, ScaleOutcome::Fixed),
            ScaleMode::Estimated { min, max } => {
                let s = self.optimal_scale;
                if s < min {
                    (min, ScaleOutcome::Clamped { unclamped: s })
                } else if s > max {
                    (max, ScaleOutcome::Clamped { unclamped: s })
                } else {
                    (s, ScaleOutcome::Estimated)
                }
            }
        };
        let translation = self.target_mean - self.rotation.rotate(&self.source_mean) * scale;
        (SimilarityTransform { scale, rotation: self.rotation, translation }, outcome)
    }
}
