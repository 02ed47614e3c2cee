//! Simulated landmark acquisition: a virtual phone camera aimed at each
//! landmark, depth read off the head surface, and sensor noise on top.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    frame_with_z_axis, pixel_ray, unproject, CameraIntrinsics, CameraPose, GeometryError, Pixel, Point3, Rotation,
    SimilarityTransform, TriangleMesh, Vec3,
};
use crate::registration::{aggregate_repeated_picks, LandmarkId, LandmarkSet, Space};

/// A hit farther than this from the aimed landmark counts as not visible.
pub const VISIBILITY_GATE_MM: f64 = 20.0;
/// Landmarks must lie this close to the head surface.
pub const SURFACE_TOLERANCE_MM: f64 = 0.5;
/// Default phone-to-face distance.
pub const DEFAULT_STANDOFF_MM: f64 = 300.0;
/// Radius of the patch whose normals define a landmark's default approach.
const APPROACH_PATCH_MM: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AcquisitionError {
    #[error("landmark {0} is not part of the scene")]
    UnknownLandmark(LandmarkId),
    #[error("{id} is not visible from this pose ({reason})")]
    NotVisible { id: LandmarkId, reason: String },
    #[error("standoff must be positive, got {0} mm")]
    InvalidStandoff(f64),
    #[error("approach direction must be non-zero")]
    InvalidApproach,
    #[error("picks per landmark must be at least 1")]
    NoPicks,
    #[error("landmark {id} is {distance:.3} mm from the head surface (limit {SURFACE_TOLERANCE_MM} mm)")]
    OffSurface { id: LandmarkId, distance: f64 },
    #[error("scene needs all seven model landmarks, missing {0:?}")]
    IncompleteLandmarks(Vec<LandmarkId>),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// The simulated patient: head surface in world space, ventricles in model
/// space, and the ground-truth pose linking the two.
#[derive(Debug, Clone)]
pub struct VirtualScene {
    head_mesh: TriangleMesh,
    ventricle_mesh: TriangleMesh,
    model_to_world_truth: SimilarityTransform,
    true_world_landmarks: LandmarkSet,
    model_landmarks: LandmarkSet,
    approach: BTreeMap<LandmarkId, Vec3>,
}

impl VirtualScene {
    /// `head_model` and `ventricle_mesh` are in model space; the head is moved
    /// into world space with `model_to_world_truth`.
    pub fn new(
        head_model: &TriangleMesh,
        ventricle_mesh: TriangleMesh,
        model_to_world_truth: SimilarityTransform,
        model_landmarks: LandmarkSet,
    ) -> Result<Self, AcquisitionError> {
        if !model_landmarks.is_complete() {
            return Err(AcquisitionError::IncompleteLandmarks(model_landmarks.missing()));
        }
        let model_landmarks = LandmarkSet::from_points(Space::Model, model_landmarks.iter().map(|(k, p)| (k, *p)));
        let head_mesh = head_model.transformed(&model_to_world_truth);
        let true_world_landmarks = model_landmarks.transformed(&model_to_world_truth, Space::World);
        let centre = head_mesh.vertex_centroid();
        let mut approach = BTreeMap::new();
        for (id, p) in true_world_landmarks.iter() {
            let s = head_mesh.closest_point(p);
            if s.distance > SURFACE_TOLERANCE_MM {
                return Err(AcquisitionError::OffSurface { id, distance: s.distance });
            }
            approach.insert(id, patch_normal(&head_mesh, p, &centre));
        }
        Ok(Self { head_mesh, ventricle_mesh, model_to_world_truth, true_world_landmarks, model_landmarks, approach })
    }

    pub fn head_mesh(&self) -> &TriangleMesh {
        &self.head_mesh
    }

    pub fn ventricle_mesh(&self) -> &TriangleMesh {
        &self.ventricle_mesh
    }

    pub fn model_to_world_truth(&self) -> &SimilarityTransform {
        &self.model_to_world_truth
    }

    pub fn true_world_landmarks(&self) -> &LandmarkSet {
        &self.true_world_landmarks
    }

    pub fn model_landmarks(&self) -> &LandmarkSet {
        &self.model_landmarks
    }

    pub fn true_world_landmark(&self, id: LandmarkId) -> Point3 {
        *self.true_world_landmarks.get(id).expect("scene landmarks are complete")
    }

    /// Outward surface normal around the landmark, used as the default
    /// direction from which the phone approaches it.
    pub fn approach_direction(&self, id: LandmarkId) -> Vec3 {
        self.approach[&id]
    }
}

fn patch_normal(mesh: &TriangleMesh, p: &Point3, centre: &Point3) -> Vec3 {
    let mut n = Vec3::zeros();
    for i in 0..mesh.triangle_count() {
        let [a, b, c] = mesh.triangle(i);
        let tc = Point3::from((a.coords + b.coords + c.coords) / 3.0);
        if (tc - p).norm() <= APPROACH_PATCH_MM {
            n += (b - a).cross(&(c - a)) * 0.5;
        }
    }
    if n.norm() < 1e-12 {
        let s = mesh.closest_point(p);
        n = mesh.face_normal(s.triangle);
    }
    let n = n.normalize();
    if n.dot(&(p - centre)) < 0.0 {
        -n
    } else {
        n
    }
}

/// Per-capture sensor error model. All terms are zero-mean Gaussians except
/// the depth bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    /// Jitter of the centre aiming cursor (pixels, per axis).
    pub aim_sigma_px: f64,
    /// Depth reading noise (mm).
    pub depth_sigma_mm: f64,
    /// Constant depth offset (mm).
    pub depth_bias_mm: f64,
    /// Camera orientation drift per capture (degrees, per axis).
    pub pose_rot_sigma_deg: f64,
    /// Camera position drift per capture (mm, per axis).
    pub pose_trans_sigma_mm: f64,
    /// RNG stream selector, mixed into per-trial seeds.
    pub stream: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::zero()
    }
}

impl NoiseModel {
    pub fn zero() -> Self {
        Self {
            aim_sigma_px: 0.0,
            depth_sigma_mm: 0.0,
            depth_bias_mm: 0.0,
            pose_rot_sigma_deg: 0.0,
            pose_trans_sigma_mm: 0.0,
            stream: 0,
        }
    }

    /// Every magnitude (including the bias) multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            aim_sigma_px: self.aim_sigma_px * k,
            depth_sigma_mm: self.depth_sigma_mm * k,
            depth_bias_mm: self.depth_bias_mm * k,
            pose_rot_sigma_deg: self.pose_rot_sigma_deg * k,
            pose_trans_sigma_mm: self.pose_trans_sigma_mm * k,
            stream: self.stream,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let sigmas = [self.aim_sigma_px, self.depth_sigma_mm, self.pose_rot_sigma_deg, self.pose_trans_sigma_mm];
        if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) || !self.depth_bias_mm.is_finite() {
            return Err(format!("noise sigmas must be finite and non-negative: {self:?}"));
        }
        Ok(())
    }
}

/// One press of the acquire button.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionSample {
    pub landmark: LandmarkId,
    /// Where the cursor actually pointed.
    pub pixel: Pixel,
    /// Depth reading along the camera axis (mm).
    pub depth: f64,
    /// Camera pose as the device believed it to be at capture time.
    pub pose: CameraPose,
    /// `unproject(pixel, depth)` under `pose`.
    pub point: Point3,
}

/// Places the camera `standoff_mm` from the landmark along `approach` (the
/// direction from the landmark towards the device), looking back at it.
pub fn aim_camera(
    scene: &VirtualScene,
    landmark: LandmarkId,
    standoff_mm: f64,
    approach: &Vec3,
) -> Result<CameraPose, AcquisitionError> {
    if !(standoff_mm > 0.0 && standoff_mm.is_finite()) {
        return Err(AcquisitionError::InvalidStandoff(standoff_mm));
    }
    let n = approach.norm();
    if !(n > 1e-12 && n.is_finite()) {
        return Err(AcquisitionError::InvalidApproach);
    }
    let target = scene.true_world_landmarks.get(landmark).ok_or(AcquisitionError::UnknownLandmark(landmark))?;
    let dir = approach / n;
    let rotation = frame_with_z_axis(&-dir);
    Ok(CameraPose::new(rotation, target.coords + dir * standoff_mm))
}

/// Simulates one capture: jitter the aim, read depth where the jittered ray
/// meets the head, drift the recorded pose, then unproject.
///
/// Always consumes the same number of random draws, so streams stay aligned
/// regardless of which noise terms are zero.
pub fn acquire_landmark<R: Rng + ?Sized>(
    scene: &VirtualScene,
    pose: &CameraPose,
    intr: &CameraIntrinsics,
    landmark: LandmarkId,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<AcquisitionSample, AcquisitionError> {
    let mut draw = || -> f64 { rng.sample(StandardNormal) };
    let aim = [draw(), draw()];
    let depth_noise = draw();
    let rot = Vec3::new(draw(), draw(), draw());
    let trans = Vec3::new(draw(), draw(), draw());

    let truth = scene.true_world_landmarks.get(landmark).ok_or(AcquisitionError::UnknownLandmark(landmark))?;
    let pixel = Pixel { u: intr.cx + aim[0] * noise.aim_sigma_px, v: intr.cy + aim[1] * noise.aim_sigma_px };
    let ray = pixel_ray(intr, pose, pixel);
    let hit = scene
        .head_mesh
        .ray_intersect(&ray)
        .ok_or_else(|| AcquisitionError::NotVisible { id: landmark, reason: "cursor ray misses the head".into() })?;
    let gap = (hit.point - truth).norm();
    if gap > VISIBILITY_GATE_MM {
        return Err(AcquisitionError::NotVisible {
            id: landmark,
            reason: format!("surface hit is {gap:.1} mm from the landmark"),
        });
    }
    let true_depth = pose.apply_inverse(&hit.point).z;
    let depth = true_depth + depth_noise * noise.depth_sigma_mm + noise.depth_bias_mm;

    let drift = Rotation::from_scaled_axis(rot * noise.pose_rot_sigma_deg.to_radians());
    let recorded = CameraPose::new(drift.compose(&pose.rotation), pose.translation + trans * noise.pose_trans_sigma_mm);
    let point = unproject(intr, &recorded, pixel, depth)?;
    Ok(AcquisitionSample { landmark, pixel, depth, pose: recorded, point })
}

/// Acquired landmark set from one simulated walkthrough.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedSession {
    /// Centroid of the picks for each landmark.
    pub landmarks: LandmarkSet,
    /// RMS spread of the picks about their centroid, per landmark (mm).
    pub spread: BTreeMap<LandmarkId, f64>,
    pub samples: Vec<AcquisitionSample>,
}

/// Acquires every landmark in order, `picks_per_landmark` times each, from its
/// default approach direction, and averages repeated picks.
pub fn simulate_session<R: Rng + ?Sized>(
    scene: &VirtualScene,
    intr: &CameraIntrinsics,
    noise: &NoiseModel,
    rng: &mut R,
    picks_per_landmark: usize,
    standoff_mm: f64,
) -> Result<SimulatedSession, AcquisitionError> {
    if picks_per_landmark == 0 {
        return Err(AcquisitionError::NoPicks);
    }
    let mut landmarks = LandmarkSet::new(Space::World);
    let mut spread = BTreeMap::new();
    let mut samples = Vec::with_capacity(7 * picks_per_landmark);
    for id in LandmarkId::ALL {
        let pose = aim_camera(scene, id, standoff_mm, &scene.approach_direction(id))?;
        let mut picks = Vec::with_capacity(picks_per_landmark);
        for _ in 0..picks_per_landmark {
            let s = acquire_landmark(scene, &pose, intr, id, noise, rng)?;
            picks.push(s.point);
            samples.push(s);
        }
        let agg = aggregate_repeated_picks(&picks).expect("at least one pick");
        landmarks.insert(id, agg.centroid);
        spread.insert(id, agg.spread);
    }
    Ok(SimulatedSession { landmarks, spread, samples })
}
