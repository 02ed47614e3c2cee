use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::RegistrationError;
use crate::geometry::{Point3, Vec3};

/// Eigenvalue ratio below which an axis counts as having no extent.
pub const FLAT_RATIO: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigurationKind {
    Collinear,
    Coplanar,
    WellConditioned,
}

/// Shape of a point configuration from its centred covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Degeneracy {
    pub kind: ConfigurationKind,
    /// Smallest over largest covariance eigenvalue (0 for coincident points).
    pub condition_ratio: f64,
    /// Covariance eigenvalues in ascending order (mm²).
    pub eigenvalues: [f64; 3],
    /// Unit eigenvector of the smallest eigenvalue: the direction in which the
    /// configuration is thinnest.
    pub thinnest_axis: Vec3,
}

pub fn detect_degeneracy(points: &[Point3]) -> Result<Degeneracy, RegistrationError> {
    if points.len() < 3 {
        return Err(RegistrationError::TooFewPoints { needed: 3, got: points.len() });
    }
    let n = points.len() as f64;
    let mean: Vec3 = points.iter().map(|p| p.coords).sum::<Vec3>() / n;
    let mut cov = Matrix3::<f64>::zeros();
    for p in points {
        let c = p.coords - mean;
        cov += c * c.transpose();
    }
    cov /= n;
    let eig = cov.symmetric_eigen();
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    // Round-off can leave tiny negative eigenvalues for flat inputs.
    let ev = idx.map(|i| eig.eigenvalues[i].max(0.0));
    let thinnest_axis = eig.eigenvectors.column(idx[0]).into_owned();
    let largest = ev[2];
    let (kind, condition_ratio) = if largest <= 0.0 {
        (ConfigurationKind::Collinear, 0.0)
    } else {
        let ratio = ev[0] / largest;
        let kind = if ev[1] < FLAT_RATIO * largest {
            ConfigurationKind::Collinear
        } else if ratio < FLAT_RATIO {
            ConfigurationKind::Coplanar
        } else {
            ConfigurationKind::WellConditioned
        };
        (kind, ratio)
    };
    Ok(Degeneracy { kind, condition_ratio, eigenvalues: ev, thinnest_axis })
}
