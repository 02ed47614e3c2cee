//! Procedural head phantom: a superellipsoid scalp with nose and ear
//! protrusions, two curved lateral-ventricle tubes, the seven facial
//! landmarks on the surface, and a Kocher's-point style entry with a frontal
//! horn target.
//!
//! Model frame: +x towards the patient's left, +y anterior, +z superior,
//! origin at the head centre. All dimensions are synthetic plausibility
//! choices recorded in [`PhantomParams`].

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{NoiseModel, DEFAULT_STANDOFF_MM};
use crate::geometry::{CameraIntrinsics, Point3, Ray, Rotation, SimilarityTransform, TriangleMesh, Vec3};
use crate::registration::{LandmarkId, LandmarkSet, Space};

use super::scenario::{Scenario, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomParams {
    /// Superellipsoid semi-axes (x, y, z) in mm.
    pub semi_axes: [f64; 3],
    pub exponent: f64,
    /// Rings between the poles and segments around the vertical axis.
    pub lat_segments: usize,
    pub lon_segments: usize,
    pub nose_height_mm: f64,
    pub nose_width_rad: f64,
    pub ear_height_mm: f64,
    pub ear_width_rad: f64,
    /// Lateral offset of each ventricle centreline from the midline.
    pub ventricle_offset_mm: f64,
    /// Ventricle cross-section half-width and half-height.
    pub ventricle_radii_mm: [f64; 2],
    pub ventricle_rings: usize,
    pub ventricle_sides: usize,
    /// Scalp arc length from the nasion to the entry point, then lateral shift.
    pub entry_arc_mm: f64,
    pub entry_lateral_mm: f64,
    /// Ground-truth model→world pose. Drawn from the RNG when absent.
    pub model_to_world: Option<SimilarityTransform>,
    pub catheter_offset_mm: [f64; 3],
}

impl Default for PhantomParams {
    fn default() -> Self {
        Self {
            semi_axes: [90.0, 110.0, 95.0],
            exponent: 2.5,
            lat_segments: 72,
            lon_segments: 112,
            nose_height_mm: 22.0,
            nose_width_rad: 0.12,
            ear_height_mm: 10.0,
            ear_width_rad: 0.15,
            ventricle_offset_mm: 14.0,
            ventricle_radii_mm: [5.0, 9.0],
            ventricle_rings: 40,
            ventricle_sides: 16,
            entry_arc_mm: 110.0,
            entry_lateral_mm: 30.0,
            model_to_world: None,
            catheter_offset_mm: [0.0, 0.0, 180.0],
        }
    }
}

/// Scenario plus the meshes it references.
#[derive(Debug, Clone)]
pub struct Phantom {
    pub scenario: Scenario,
    pub head: TriangleMesh,
    pub ventricles: TriangleMesh,
}

pub const HEAD_FILE: &str = "head.obj";
pub const VENTRICLES_FILE: &str = "ventricles.obj";

pub fn generate_phantom<R: Rng + ?Sized>(params: &PhantomParams, rng: &mut R) -> Phantom {
    let head = head_mesh(params);
    let ventricles = ventricle_mesh(params);

    let surface = |dir: Vec3| -> Point3 {
        let ray = Ray::new(Point3::origin(), dir).expect("non-zero direction");
        head.ray_intersect(&ray).expect("rays from the centre always hit a star-shaped head").point
    };
    // Right side is −x.
    let dirs = [
        Vec3::new(-1.0, 0.05, -0.22),
        Vec3::new(-0.55, 0.85, -0.02),
        Vec3::new(-0.2, 1.0, 0.0),
        Vec3::new(0.0, 1.0, 0.14),
        Vec3::new(0.2, 1.0, 0.0),
        Vec3::new(0.55, 0.85, -0.02),
        Vec3::new(1.0, 0.05, -0.22),
    ];
    let landmarks = LandmarkSet::from_ordered(Space::Model, dirs.map(surface));

    let nasion = *landmarks.get(LandmarkId::NoseBridge).unwrap();
    let crest = sagittal_point_at_arc(params, nasion, params.entry_arc_mm);
    let planned_entry = surface(Vec3::new(-params.entry_lateral_mm, crest.y, crest.z));
    let planned_target = ventricle_centreline(params, -params.ventricle_offset_mm, 0.08);

    let model_to_world = params.model_to_world.unwrap_or_else(|| {
        let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let angle = rng.random_range(0.0..30f64.to_radians());
        let t = Vec3::new(
            rng.random_range(-50.0..50.0),
            rng.random_range(-50.0..50.0),
            -400.0 + rng.random_range(-50.0..50.0),
        );
        SimilarityTransform::rigid(Rotation::from_axis_angle(&axis, angle), t)
    });

    let scenario = Scenario {
        schema_version: SCHEMA_VERSION,
        name: "synthetic-phantom".into(),
        synthetic: true,
        description: "Procedurally generated head phantom. Dimensions are synthetic plausibility choices, \
                      not measurements of any physical phantom."
            .into(),
        head_mesh: HEAD_FILE.into(),
        ventricle_mesh: VENTRICLES_FILE.into(),
        model_landmarks: landmarks,
        model_to_world,
        planned_entry,
        planned_target,
        noise: NoiseModel::zero(),
        camera: CameraIntrinsics::phone_default(),
        standoff_mm: DEFAULT_STANDOFF_MM,
        picks_per_landmark: 1,
        catheter_offset: Vec3::from(params.catheter_offset_mm),
        seed: 0,
        phantom: Some(params.clone()),
    };
    Phantom { scenario, head, ventricles }
}

fn radius(params: &PhantomParams, d: &Vec3) -> f64 {
    let [a, b, c] = params.semi_axes;
    let e = params.exponent;
    let base = ((d.x / a).abs().powf(e) + (d.y / b).abs().powf(e) + (d.z / c).abs().powf(e)).powf(-1.0 / e);
    let bump = |centre: Vec3, height: f64, width: f64| {
        let ang = d.angle(&centre.normalize());
        height * (-(ang * ang) / (2.0 * width * width)).exp()
    };
    base + bump(Vec3::new(0.0, 1.0, -0.25), params.nose_height_mm, params.nose_width_rad)
        + bump(Vec3::new(-1.0, -0.05, -0.15), params.ear_height_mm, params.ear_width_rad)
        + bump(Vec3::new(1.0, -0.05, -0.15), params.ear_height_mm, params.ear_width_rad)
}

fn head_mesh(params: &PhantomParams) -> TriangleMesh {
    let lat = params.lat_segments.max(3);
    let lon = params.lon_segments.max(3);
    let at = |theta: f64, phi: f64| {
        let d = Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
        Point3::from(d * radius(params, &d))
    };
    let mut v = vec![at(0.0, 0.0)];
    for i in 1..lat {
        let theta = PI * i as f64 / lat as f64;
        for j in 0..lon {
            v.push(at(theta, TAU * j as f64 / lon as f64));
        }
    }
    v.push(at(PI, 0.0));
    let south = (v.len() - 1) as u32;
    let ring = |i: usize, j: usize| (1 + (i - 1) * lon + j % lon) as u32;
    let mut t = Vec::with_capacity(2 * lat * lon);
    for j in 0..lon {
        t.push([0, ring(1, j), ring(1, j + 1)]);
    }
    for i in 1..lat - 1 {
        for j in 0..lon {
            t.push([ring(i, j), ring(i + 1, j), ring(i, j + 1)]);
            t.push([ring(i + 1, j), ring(i + 1, j + 1), ring(i, j + 1)]);
        }
    }
    for j in 0..lon {
        t.push([ring(lat - 1, j), south, ring(lat - 1, j + 1)]);
    }
    oriented(v, t)
}

/// Centreline of one lateral ventricle, `u ∈ [0, 1]` from the frontal horn
/// backwards, arching upwards in the middle.
fn ventricle_centreline(_params: &PhantomParams, x: f64, u: f64) -> Point3 {
    Point3::new(x, 28.0 - 58.0 * u, 18.0 + 14.0 * (PI * u).sin() - 8.0 * u)
}

fn ventricle_mesh(params: &PhantomParams) -> TriangleMesh {
    let rings = params.ventricle_rings.max(2);
    let sides = params.ventricle_sides.max(3);
    let [ra, rb] = params.ventricle_radii_mm;
    let mut v = Vec::new();
    let mut t = Vec::new();
    for side in [-1.0, 1.0] {
        let x = side * params.ventricle_offset_mm;
        let base = v.len() as u32;
        let h = 1e-4;
        for k in 0..rings {
            let u = k as f64 / (rings - 1) as f64;
            let c = ventricle_centreline(params, x, u);
            let tangent = (ventricle_centreline(params, x, (u + h).min(1.0))
                - ventricle_centreline(params, x, (u - h).max(0.0)))
            .normalize();
            let lateral = Vec3::x();
            let normal = tangent.cross(&lateral).normalize();
            let taper = 0.55 + 0.45 * (PI * u).sin().sqrt();
            for s in 0..sides {
                let psi = TAU * s as f64 / sides as f64;
                v.push(c + lateral * (ra * taper * psi.cos()) + normal * (rb * taper * psi.sin()));
            }
        }
        let idx = |k: usize, s: usize| base + (k * sides + s % sides) as u32;
        for k in 0..rings - 1 {
            for s in 0..sides {
                t.push([idx(k, s), idx(k + 1, s), idx(k, s + 1)]);
                t.push([idx(k + 1, s), idx(k + 1, s + 1), idx(k, s + 1)]);
            }
        }
        for (k, flip) in [(0, true), (rings - 1, false)] {
            let centre: Vec3 = (0..sides).map(|s| v[idx(k, s) as usize].coords).sum::<Vec3>() / sides as f64;
            v.push(Point3::from(centre));
            let cap = (v.len() - 1) as u32;
            for s in 0..sides {
                let (a, b) = (idx(k, s), idx(k, s + 1));
                t.push(if flip { [cap, b, a] } else { [cap, a, b] });
            }
        }
    }
    oriented(v, t)
}

/// Flips the winding if the signed volume is negative so normals face out.
fn oriented(v: Vec<Point3>, mut t: Vec<[u32; 3]>) -> TriangleMesh {
    let vol: f64 =
        t.iter().map(|f| v[f[0] as usize].coords.dot(&v[f[1] as usize].coords.cross(&v[f[2] as usize].coords))).sum();
    if vol < 0.0 {
        for f in &mut t {
            f.swap(1, 2);
        }
    }
    TriangleMesh::new(v, t).expect("phantom mesh is valid")
}

/// Walks the midline scalp curve from `start` over the vertex by `arc` mm.
fn sagittal_point_at_arc(params: &PhantomParams, start: Point3, arc: f64) -> Point3 {
    let at = |alpha: f64| {
        let d = Vec3::new(0.0, alpha.cos(), alpha.sin());
        Point3::from(d * radius(params, &d))
    };
    let mut alpha = start.z.atan2(start.y);
    let mut prev = at(alpha);
    let mut walked = 0.0;
    let step = 1e-4;
    while walked < arc && alpha < PI {
        alpha += step;
        let p = at(alpha);
        walked += (p - prev).norm();
        prev = p;
    }
    prev
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn meshes_are_closed() {
        let p = generate_phantom(&PhantomParams::default(), &mut ChaCha8Rng::seed_from_u64(1));
        assert!(p.head.is_watertight());
        assert!(p.ventricles.is_watertight());
    }

    #[test]
    fn landmarks_on_surface() {
        let p = generate_phantom(&PhantomParams::default(), &mut ChaCha8Rng::seed_from_u64(1));
        for (_, q) in p.scenario.model_landmarks.iter() {
            assert!(p.head.closest_point(q).distance < 1e-9);
        }
        assert!(p.head.closest_point(&p.scenario.planned_entry).distance < 1e-9);
    }

    #[test]
    fn target_inside_ventricles_and_below_entry() {
        let p = generate_phantom(&PhantomParams::default(), &mut ChaCha8Rng::seed_from_u64(1));
        assert!(p.ventricles.contains(&p.scenario.planned_target).unwrap());
        let depth = (p.scenario.planned_entry - p.scenario.planned_target).norm();
        assert!((40.0..90.0).contains(&depth), "{depth}");
    }
}
