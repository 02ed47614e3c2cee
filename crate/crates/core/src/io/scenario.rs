use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{load_mesh, IoError};
use crate::acquisition::{NoiseModel, VirtualScene};
use crate::geometry::{CameraIntrinsics, Point3, SimilarityTransform, Vec3};
use crate::guidance::CatheterModel;
use crate::registration::{LandmarkId, LandmarkSet, ScaleMode, Space};
use crate::session::SessionContext;

use super::phantom::PhantomParams;

pub const SCHEMA_VERSION: u32 = 1;

/// Everything needed to stand up a simulated patient. Mesh paths are
/// relative to the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    /// True for procedurally generated phantoms.
    pub synthetic: bool,
    #[serde(default)]
    pub description: String,
    /// Head surface in model space.
    pub head_mesh: PathBuf,
    /// Ventricles in model space.
    pub ventricle_mesh: PathBuf,
    pub model_landmarks: LandmarkSet,
    pub model_to_world: SimilarityTransform,
    /// Planned entry point on the model (mm).
    pub planned_entry: Point3,
    /// Catheter target on the model (mm).
    pub planned_target: Point3,
    pub noise: NoiseModel,
    pub camera: CameraIntrinsics,
    pub standoff_mm: f64,
    #[serde(default = "one")]
    pub picks_per_landmark: usize,
    pub catheter_offset: Vec3,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phantom: Option<PhantomParams>,
}

fn one() -> usize {
    1
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
        let s: Scenario = serde_json::from_str(&text).map_err(|e| IoError::json(path, e))?;
        s.validate().map_err(|m| IoError::Invalid(format!("{}: {m}", path.display())))?;
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        let text = serde_json::to_string_pretty(self).expect("scenario serializes");
        std::fs::write(path, text + "\n").map_err(|e| IoError::io(path, e))
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.model_landmarks.space != Space::Model {
            return Err("model_landmarks must be tagged 'model'".into());
        }
        if !self.model_landmarks.is_complete() {
            return Err(format!("model_landmarks missing {:?}", self.model_landmarks.missing()));
        }
        if !(self.standoff_mm > 0.0) {
            return Err("standoff_mm must be positive".into());
        }
        if self.picks_per_landmark == 0 {
            return Err("picks_per_landmark must be at least 1".into());
        }
        self.noise.validate()?;
        CatheterModel::new(self.catheter_offset).map_err(|e| e.to_string())?;
        Ok(())
    }

    pub fn catheter(&self) -> CatheterModel {
        CatheterModel::new(self.catheter_offset).expect("validated")
    }

    /// Loads the meshes (relative to `base_dir`) and builds the scene.
    pub fn build_scene(&self, base_dir: &Path) -> Result<VirtualScene, IoError> {
        let head = load_mesh(&base_dir.join(&self.head_mesh))?;
        let ventricles = load_mesh(&base_dir.join(&self.ventricle_mesh))?;
        VirtualScene::new(&head, ventricles, self.model_to_world, self.model_landmarks.clone())
            .map_err(|e| IoError::Invalid(e.to_string()))
    }
}

/// A scenario with its meshes loaded.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub id: String,
    pub path: PathBuf,
    pub scenario: Scenario,
    pub scene: Arc<VirtualScene>,
}

impl LoadedScenario {
    pub fn load(path: &Path) -> Result<Self, IoError> {
        let scenario = Scenario::load(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let scene = Arc::new(scenario.build_scene(base)?);
        let id = base.file_name().and_then(|n| n.to_str()).unwrap_or(&scenario.name).to_string();
        Ok(Self { id, path: path.to_path_buf(), scenario, scene })
    }

    pub fn session_context(&self, scale_mode: ScaleMode) -> SessionContext {
        SessionContext {
            scene: self.scene.clone(),
            catheter: self.scenario.catheter(),
            planned_entry_model: Some(self.scenario.planned_entry),
            target_model: self.scenario.planned_target,
            scale_mode,
        }
    }
}

/// On-disk landmark file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LandmarkFile {
    schema_version: u32,
    space: Space,
    landmarks: BTreeMap<LandmarkId, Point3>,
}

pub fn load_landmarks(path: &Path) -> Result<LandmarkSet, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    let f: LandmarkFile = serde_json::from_str(&text).map_err(|e| IoError::json(path, e))?;
    if f.schema_version != SCHEMA_VERSION {
        return Err(IoError::Invalid(format!("{}: unsupported schema_version {}", path.display(), f.schema_version)));
    }
    Ok(LandmarkSet::from_points(f.space, f.landmarks))
}

pub fn landmarks_to_json(set: &LandmarkSet) -> String {
    let f = LandmarkFile {
        schema_version: SCHEMA_VERSION,
        space: set.space,
        landmarks: set.iter().map(|(k, p)| (k, *p)).collect(),
    };
    serde_json::to_string_pretty(&f).expect("landmarks serialize") + "\n"
}

pub fn save_landmarks(set: &LandmarkSet, path: &Path) -> Result<(), IoError> {
    std::fs::write(path, landmarks_to_json(set)).map_err(|e| IoError::io(path, e))
}
