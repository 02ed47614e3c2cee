//! Entry-point placement, target registration error and marker-anchored
//! catheter tip feedback.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, Point3, Ray, RigidPose, SimilarityTransform, TriangleMesh, Vec3};
use crate::registration::RegistrationResult;

/// Tip error below which placement is considered acceptable (mm).
pub const CLINICAL_THRESHOLD_MM: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GuidanceError {
    #[error("ray does not hit the head surface")]
    NoSurfaceHit,
    #[error("no registration available")]
    NotRegistered,
    #[error("entry and target coincide")]
    DegeneratePlan,
    #[error("catheter marker-to-tip offset must be non-zero and finite")]
    InvalidCatheter,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Burr-hole location on the head surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntryPoint {
    pub world: Point3,
    /// Planned counterpart on the pre-operative model, when one exists.
    pub planned_model: Option<Point3>,
}

/// The nearest surface hit of `screen_ray` becomes the entry point.
pub fn place_entry_point(screen_ray: &Ray, head_mesh: &TriangleMesh) -> Result<EntryPoint, GuidanceError> {
    let hit = head_mesh.ray_intersect(screen_ray).ok_or(GuidanceError::NoSurfaceHit)?;
    Ok(EntryPoint { world: hit.point, planned_model: None })
}

/// Distance between the registered planned point and its true world location.
pub fn compute_tre(
    reg: Option<&RegistrationResult>,
    planned_model_point: &Point3,
    true_world_point: &Point3,
) -> Result<f64, GuidanceError> {
    let reg = reg.ok_or(GuidanceError::NotRegistered)?;
    Ok((reg.transform.apply(planned_model_point) - true_world_point).norm())
}

/// Rigid straight catheter: the tip sits at a fixed offset in the marker frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCatheter")]
pub struct CatheterModel {
    marker_to_tip_offset: Vec3,
}

#[derive(Deserialize)]
struct RawCatheter {
    marker_to_tip_offset: Vec3,
}

impl TryFrom<RawCatheter> for CatheterModel {
    type Error = GuidanceError;

    fn try_from(r: RawCatheter) -> Result<Self, Self::Error> {
        CatheterModel::new(r.marker_to_tip_offset)
    }
}

impl CatheterModel {
    pub fn new(marker_to_tip_offset: Vec3) -> Result<Self, GuidanceError> {
        let len = marker_to_tip_offset.norm();
        if !(len > 0.0 && len.is_finite()) {
            return Err(GuidanceError::InvalidCatheter);
        }
        Ok(Self { marker_to_tip_offset })
    }

    pub fn offset(&self) -> &Vec3 {
        &self.marker_to_tip_offset
    }

    pub fn length(&self) -> f64 {
        self.marker_to_tip_offset.norm()
    }
}

/// Marker frame to world frame.
pub type MarkerPose = RigidPose;

/// Tip position and the marker→tip segment drawn over the catheter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatheterOverlay {
    pub tip: Point3,
    pub marker_origin: Point3,
}

pub fn catheter_tip(pose: &MarkerPose, model: &CatheterModel) -> CatheterOverlay {
    CatheterOverlay { tip: pose.apply(&Point3::from(model.marker_to_tip_offset)), marker_origin: pose.origin() }
}

/// Planned straight trajectory from the entry point to a model-space target,
/// expressed in world space through a registration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPlan {
    pub entry: EntryPoint,
    pub target_model: Point3,
    pub target_world: Point3,
}

impl TrajectoryPlan {
    pub fn new(
        entry: EntryPoint,
        target_model: Point3,
        model_to_world: &SimilarityTransform,
    ) -> Result<Self, GuidanceError> {
        let target_world = model_to_world.apply(&target_model);
        if (target_world - entry.world).norm() < 1e-9 {
            return Err(GuidanceError::DegeneratePlan);
        }
        Ok(Self { entry, target_model, target_world })
    }

    pub fn direction(&self) -> Vec3 {
        (self.target_world - self.entry.world).normalize()
    }

    pub fn length(&self) -> f64 {
        (self.target_world - self.entry.world).norm()
    }
}

/// Live readouts for a tracked catheter tip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TipFeedback {
    pub tip: Point3,
    pub distance_to_ventricle: f64,
    pub closest_ventricle_point: Point3,
    /// `None` when the ventricle mesh is not watertight.
    pub inside: Option<bool>,
    /// Perpendicular distance from the tip to the planned line (mm).
    pub deviation_from_plan: f64,
    /// Signed progress of the tip along the plan from the entry point (mm).
    pub depth_along_plan: f64,
    pub remaining_to_target: f64,
}

/// Feedback against a ventricle mesh already in world space.
pub fn tip_feedback(tip: &Point3, ventricle_mesh_world: &TriangleMesh, plan: &TrajectoryPlan) -> TipFeedback {
    let s = ventricle_mesh_world.closest_point(tip);
    let inside = ventricle_mesh_world.contains(tip).ok();
    plan_feedback(tip, s.distance, s.point, inside, plan)
}

/// Same readouts as [`tip_feedback`], with the ventricles given in model
/// space. The tip is mapped back through the registration instead of moving
/// the mesh, and distances are rescaled into world millimetres.
pub fn tip_feedback_registered(
    tip: &Point3,
    ventricle_mesh_model: &TriangleMesh,
    model_to_world: &SimilarityTransform,
    plan: &TrajectoryPlan,
) -> TipFeedback {
    let tip_model = model_to_world.inverse().apply(tip);
    let s = ventricle_mesh_model.closest_point(&tip_model);
    let inside = ventricle_mesh_model.contains(&tip_model).ok();
    plan_feedback(tip, s.distance * model_to_world.scale, model_to_world.apply(&s.point), inside, plan)
}

fn plan_feedback(
    tip: &Point3,
    distance: f64,
    closest: Point3,
    inside: Option<bool>,
    plan: &TrajectoryPlan,
) -> TipFeedback {
    let dir = plan.direction();
    let rel = tip - plan.entry.world;
    let depth = rel.dot(&dir);
    let deviation = (rel - dir * depth).norm();
    TipFeedback {
        tip: *tip,
        distance_to_ventricle: distance,
        closest_ventricle_point: closest,
        inside,
        deviation_from_plan: deviation,
        depth_along_plan: depth,
        remaining_to_target: (plan.target_world - tip).norm(),
    }
}
