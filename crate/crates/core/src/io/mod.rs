//! File formats: meshes, scenarios, landmark files, reports, and the
//! procedural phantom.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::TriangleMesh;

mod mesh_format;
pub mod phantom;
pub mod report;
pub mod scenario;

pub use mesh_format::{
    detect_stl, load_mesh, load_mesh_with, parse_mesh, save_mesh, write_obj, write_stl_ascii, write_stl_binary,
    MeshFormat, MeshLoadOptions,
};
pub use phantom::{generate_phantom, Phantom, PhantomParams, HEAD_FILE, VENTRICLES_FILE};
pub use report::{read_trials_csv, summarize, write_report, Stats, Summary, TrialMetrics, TrialOutcome, TrialRecord};
pub use scenario::{landmarks_to_json, load_landmarks, save_landmarks, LoadedScenario, Scenario, SCHEMA_VERSION};

pub const SCENARIO_FILE: &str = "scenario.json";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: parse error at byte {offset}: {message}")]
    Parse { path: String, offset: usize, message: String },
    #[error("{0}: mesh has no usable triangles")]
    EmptyMesh(String),
    #[error("{0}")]
    Invalid(String),
}

impl IoError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io { path: path.display().to_string(), source }
    }

    /// JSON errors carry line and column in the message.
    pub fn json(path: &Path, e: serde_json::Error) -> Self {
        IoError::Parse { path: path.display().to_string(), offset: 0, message: e.to_string() }
    }

    /// True for read/write failures as opposed to bad content.
    pub fn is_io(&self) -> bool {
        matches!(self, IoError::Io { .. })
    }
}

/// Indexed triangle payload for renderers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshPayload {
    /// Flat `[x0, y0, z0, x1, ...]` in mm.
    pub positions: Vec<f64>,
    /// Flat `[a0, b0, c0, a1, ...]`.
    pub indices: Vec<u32>,
}

impl From<&TriangleMesh> for MeshPayload {
    fn from(mesh: &TriangleMesh) -> Self {
        Self {
            positions: mesh.vertices().iter().flat_map(|v| [v.x, v.y, v.z]).collect(),
            indices: mesh.triangles().iter().flatten().copied().collect(),
        }
    }
}

/// Writes `scenario.json` and its meshes into `dir`.
pub fn write_phantom(phantom: &Phantom, dir: &Path) -> Result<(), IoError> {
    std::fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    save_mesh(&phantom.head, &dir.join(HEAD_FILE), MeshFormat::Obj)?;
    save_mesh(&phantom.ventricles, &dir.join(VENTRICLES_FILE), MeshFormat::Obj)?;
    phantom.scenario.save(&dir.join(SCENARIO_FILE))
}
