use nalgebra::{Matrix3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{GeometryError, Point3, Vec3};

/// Proper rotation, stored as a unit quaternion and exposed as a matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(UnitQuaternion<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Self(UnitQuaternion::identity())
    }

    pub fn from_quaternion(q: UnitQuaternion<f64>) -> Self {
        Self(q)
    }

    /// Rotation of `angle` radians about `axis` (right-hand rule).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        match Unit::try_new(*axis, 1e-15) {
            Some(axis) => Self(UnitQuaternion::from_axis_angle(&axis, angle)),
            None => Self::identity(),
        }
    }

    /// Rotation vector (axis scaled by angle in radians).
    pub fn from_scaled_axis(v: Vec3) -> Self {
        Self(UnitQuaternion::from_scaled_axis(v))
    }

    /// Builds a rotation from a matrix that must already be proper-orthonormal
    /// within 1e-9.
    pub fn from_matrix(m: &Matrix3<f64>) -> Result<Self, GeometryError> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let orth = (m.transpose() * m - Matrix3::identity()).abs().max();
        let det = m.determinant();
        if orth > 1e-9 || (det - 1.0).abs() > 1e-9 {
            return Err(GeometryError::NotARotation { orthogonality: orth, determinant: det });
        }
        let rot = nalgebra::Rotation3::from_matrix_unchecked(*m);
        Ok(Self(UnitQuaternion::from_rotation_matrix(&rot)))
    }

    pub fn quaternion(&self) -> &UnitQuaternion<f64> {
        &self.0
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        self.0.to_rotation_matrix().into_inner()
    }

    pub fn angle(&self) -> f64 {
        self.0.angle()
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.inverse())
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Rotation) -> Self {
        Self(self.0 * other.0)
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

// Serialized as `[w, x, y, z]`. Deserialization keeps the stored bits when the
// quaternion is already unit length, so files round-trip exactly.
impl Serialize for Rotation {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let q = self.0.quaternion();
        [q.w, q.i, q.j, q.k].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Rotation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [w, x, y, z] = <[f64; 4]>::deserialize(d)?;
        let q = nalgebra::Quaternion::new(w, x, y, z);
        let norm = q.norm();
        if !norm.is_finite() || norm < 1e-6 {
            return Err(serde::de::Error::custom("rotation quaternion must be finite and non-zero"));
        }
        let unit = if (norm - 1.0).abs() <= 1e-12 {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::new_normalize(q)
        };
        Ok(Self(unit))
    }
}

/// `p ↦ scale · R · p + translation`, mapping model space into world space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl SimilarityTransform {
    pub fn new(scale: f64, rotation: Rotation, translation: Vec3) -> Result<Self, GeometryError> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(GeometryError::InvalidScale(scale));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        Ok(Self { scale, rotation, translation })
    }

    pub fn identity() -> Self {
        Self { scale: 1.0, rotation: Rotation::identity(), translation: Vec3::zeros() }
    }

    pub fn rigid(rotation: Rotation, translation: Vec3) -> Self {
        Self { scale: 1.0, rotation, translation }
    }

    pub fn translation(t: Vec3) -> Self {
        Self::rigid(Rotation::identity(), t)
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation.rotate(&p.coords) * self.scale + self.translation)
    }

    /// Applies only the linear part (scale and rotation) to a direction.
    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation.rotate(v) * self.scale
    }

    pub fn inverse(&self) -> Self {
        let rotation = self.rotation.inverse();
        let scale = 1.0 / self.scale;
        let translation = -(rotation.rotate(&self.translation) * scale);
        Self { scale, rotation, translation }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &SimilarityTransform) -> Self {
        Self {
            scale: self.scale * other.scale,
            rotation: self.rotation.compose(&other.rotation),
            translation: self.rotation.rotate(&other.translation) * self.scale + self.translation,
        }
    }

    /// 4×4 homogeneous matrix, row-major.
    pub fn to_homogeneous(&self) -> [[f64; 4]; 4] {
        let m = self.rotation.matrix() * self.scale;
        let t = self.translation;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)], t.x],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)], t.y],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)], t.z],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        Self::identity()
    }
}

/// Rigid frame-to-world pose. Used for the camera and for the catheter marker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidPose {
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl RigidPose {
    pub fn new(rotation: Rotation, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::new(Rotation::identity(), Vec3::zeros())
    }

    /// Frame point to world point.
    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation.rotate(&p.coords) + self.translation)
    }

    /// World point to frame point.
    pub fn apply_inverse(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation.inverse().rotate(&(p.coords - self.translation)))
    }

    pub fn origin(&self) -> Point3 {
        Point3::from(self.translation)
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidPose) -> Self {
        Self {
            rotation: self.rotation.compose(&other.rotation),
            translation: self.rotation.rotate(&other.translation) + self.translation,
        }
    }

    pub fn as_similarity(&self) -> SimilarityTransform {
        SimilarityTransform::rigid(self.rotation, self.translation)
    }
}

impl Default for RigidPose {
    fn default() -> Self {
        Self::identity()
    }
}

/// Camera frame to world frame. Camera looks along +z, x right, y down.
pub type CameraPose = RigidPose;

/// Rotation whose columns are an orthonormal basis with the given third axis.
/// The first axis is chosen deterministically from the world axis least aligned
/// with `z_axis`.
pub(crate) fn frame_with_z_axis(z_axis: &Vector3<f64>) -> Rotation {
    let z = z_axis.normalize();
    let helper = if z.z.abs() < 0.9 { Vector3::z() } else { Vector3::x() };
    let x = helper.cross(&z).normalize();
    let y = z.cross(&x);
    let m = Matrix3::from_columns(&[x, y, z]);
    Rotation(UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(m)))
}
