//! Shared 3D types and camera/mesh geometry primitives.
//!
//! Units are millimetres and frames are right-handed. "Model" space is the
//! CT/mesh frame; "world" space is the patient frame.

mod bvh;
mod camera;
mod mesh;
pub mod primitives;
mod transform;

use thiserror::Error;

pub use camera::{pixel_ray, project, unproject, CameraIntrinsics, Pixel, Projection, Ray};
pub use mesh::{RayHit, SurfacePoint, TriangleMesh};
pub use transform::{CameraPose, RigidPose, Rotation, SimilarityTransform};

pub(crate) use transform::frame_with_z_axis;

pub type Point3 = nalgebra::Point3<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("point lies behind the camera (depth {depth} mm)")]
    BehindCamera { depth: f64 },
    #[error("depth must be positive, got {0} mm")]
    NonPositiveDepth(f64),
    #[error("scale must be finite and positive, got {0}")]
    InvalidScale(f64),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("matrix is not a proper rotation (orthogonality error {orthogonality:e}, det {determinant})")]
    NotARotation { orthogonality: f64, determinant: f64 },
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("ray direction must be finite and non-zero")]
    InvalidRay,
    #[error("triangle {triangle:?} references a vertex outside 0..{vertices}")]
    IndexOutOfRange { triangle: [u32; 3], vertices: usize },
    #[error("mesh has no non-degenerate triangles")]
    EmptyMesh,
    #[error("inside test needs a watertight mesh")]
    MeshNotWatertight,
}

/// `s·R·p + t`.
pub fn apply_transform(t: &SimilarityTransform, p: &Point3) -> Point3 {
    t.apply(p)
}

pub fn ray_mesh_intersect(ray: &Ray, mesh: &TriangleMesh) -> Option<RayHit> {
    mesh.ray_intersect(ray)
}

pub fn point_mesh_distance(p: &Point3, mesh: &TriangleMesh) -> SurfacePoint {
    mesh.closest_point(p)
}
