//! Shared fixtures and independent reference implementations.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use ventronav::geometry::{Point3, Ray, Rotation, SimilarityTransform, TriangleMesh, Vec3};
use ventronav::guidance::MarkerPose;
use ventronav::io::LoadedScenario;
use ventronav::registration::{LandmarkId, ScaleMode};
use ventronav::session::{SessionContext, SessionEvent, SessionState};

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn phantom_dir() -> PathBuf {
    data_dir().join("scenarios/phantom")
}

pub fn phantom() -> &'static LoadedScenario {
    static CELL: OnceLock<LoadedScenario> = OnceLock::new();
    CELL.get_or_init(|| LoadedScenario::load(&phantom_dir().join("scenario.json")).expect("shipped phantom loads"))
}

pub fn phantom_ctx() -> Arc<SessionContext> {
    Arc::new(phantom().session_context(ScaleMode::bounded()))
}

pub fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> Vec3 {
    Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)) * sigma
}

pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    // Normalised 4-D Gaussian gives a uniform unit quaternion.
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-6 {
            let uq = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]));
            return Rotation::from_quaternion(uq);
        }
    }
}

pub fn random_similarity<R: Rng + ?Sized>(rng: &mut R, scale: (f64, f64), trans: f64) -> SimilarityTransform {
    let s = rng.random_range(scale.0..=scale.1);
    let t =
        Vec3::new(rng.random_range(-trans..trans), rng.random_range(-trans..trans), rng.random_range(-trans..trans));
    SimilarityTransform::new(s, random_rotation(rng), t).unwrap()
}

/// Random triangle soup inside a 200 mm box, overlapping freely.
pub fn random_soup<R: Rng + ?Sized>(rng: &mut R, n: usize) -> TriangleMesh {
    let mut v = Vec::with_capacity(3 * n);
    let mut t = Vec::with_capacity(n);
    for i in 0..n {
        let c = Vec3::new(
            rng.random_range(-100.0..100.0),
            rng.random_range(-100.0..100.0),
            rng.random_range(-100.0..100.0),
        );
        let size = rng.random_range(2.0..40.0);
        for _ in 0..3 {
            v.push(Point3::from(c + gaussian_vec(rng, size)));
        }
        t.push([3 * i as u32, 3 * i as u32 + 1, 3 * i as u32 + 2]);
    }
    TriangleMesh::new(v, t).unwrap()
}

// ---- Reference geometry on plain arrays, independent of the library. ----

type V = [f64; 3];

fn sub(a: V, b: V) -> V {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
fn dot(a: V, b: V) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
fn cross(a: V, b: V) -> V {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}
fn axpy(a: V, s: f64, d: V) -> V {
    [a[0] + s * d[0], a[1] + s * d[1], a[2] + s * d[2]]
}
fn arr(p: &Point3) -> V {
    [p.x, p.y, p.z]
}

/// Möller–Trumbore, both faces, hits with t > 0.
pub fn ref_ray_triangle(o: V, d: V, a: V, b: V, c: V) -> Option<f64> {
    let e1 = sub(b, a);
    let e2 = sub(c, a);
    let h = cross(d, e2);
    let det = dot(e1, h);
    if det == 0.0 {
        return None;
    }
    let f = 1.0 / det;
    let s = sub(o, a);
    let u = f * dot(s, h);
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = cross(s, e1);
    let v = f * dot(d, q);
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = f * dot(e2, q);
    (t > 0.0).then_some(t)
}

/// Exhaustive scan: smallest t, lowest index on ties.
pub fn ref_ray_mesh(origin: &Point3, dir: &Vec3, mesh: &TriangleMesh) -> Option<(f64, usize)> {
    let o = arr(origin);
    let d = [dir.x, dir.y, dir.z];
    let mut best: Option<(f64, usize)> = None;
    for i in 0..mesh.triangle_count() {
        let [a, b, c] = mesh.triangle(i);
        if let Some(t) = ref_ray_triangle(o, d, arr(&a), arr(&b), arr(&c)) {
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, i));
            }
        }
    }
    best
}

fn closest_on_segment(p: V, a: V, b: V) -> V {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let s = if len2 == 0.0 { 0.0 } else { (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0) };
    axpy(a, s, ab)
}

/// Closest point on a triangle: orthogonal projection if it falls inside
/// (barycentric test), else the best of the three edges.
pub fn ref_closest_on_triangle(p: V, a: V, b: V, c: V) -> V {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let n = cross(ab, ac);
    let nn = dot(n, n);
    let dist = dot(sub(p, a), n) / nn;
    let q = axpy(p, -dist, n);
    // Barycentric coordinates of q via sub-triangle areas.
    let w_a = dot(cross(sub(b, q), sub(c, q)), n) / nn;
    let w_b = dot(cross(sub(c, q), sub(a, q)), n) / nn;
    let w_c = 1.0 - w_a - w_b;
    if w_a >= 0.0 && w_b >= 0.0 && w_c >= 0.0 {
        return q;
    }
    let cands = [closest_on_segment(p, a, b), closest_on_segment(p, b, c), closest_on_segment(p, c, a)];
    let d2 = |x: V| dot(sub(p, x), sub(p, x));
    cands.into_iter().min_by(|x, y| d2(*x).total_cmp(&d2(*y))).unwrap()
}

/// Exhaustive scan: minimum distance and the point achieving it.
pub fn ref_point_mesh(p: &Point3, mesh: &TriangleMesh) -> (f64, Point3) {
    let pp = arr(p);
    let mut best = (f64::INFINITY, Point3::origin());
    for i in 0..mesh.triangle_count() {
        let [a, b, c] = mesh.triangle(i);
        let q = ref_closest_on_triangle(pp, arr(&a), arr(&b), arr(&c));
        let d = dot(sub(pp, q), sub(pp, q)).sqrt();
        if d < best.0 {
            best = (d, Point3::new(q[0], q[1], q[2]));
        }
    }
    best
}

/// Plain 3×3 product of a row-major matrix and a vector.
pub fn mat_vec(m: [[f64; 3]; 3], v: V) -> V {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

/// Random event biased towards progress: picks land near the true landmark,
/// entry rays aim at the head, and resets are rare.
pub fn random_event<R: Rng + ?Sized>(rng: &mut R, ctx: &SessionContext, state: &SessionState) -> SessionEvent {
    let scene = &ctx.scene;
    let roll: f64 = rng.random();
    match rng.random_range(0..100) {
        0 => SessionEvent::Reset,
        1..=25 => {
            let id = state.current_landmark().unwrap_or(LandmarkId::first());
            let point = if roll < 0.9 {
                scene.true_world_landmark(id) + gaussian_vec(rng, 2.0)
            } else {
                Point3::from(gaussian_vec(rng, 200.0))
            };
            SessionEvent::Acquire { point }
        }
        26..=30 => SessionEvent::Delete,
        31..=50 => SessionEvent::Next,
        51..=56 => SessionEvent::Back,
        57..=66 => SessionEvent::Register,
        67..=74 => SessionEvent::Confirm,
        75..=84 => {
            let centre = scene.head_mesh().vertex_centroid();
            let origin = centre + gaussian_vec(rng, 1.0).normalize() * 250.0;
            let aim = if roll < 0.8 { centre + gaussian_vec(rng, 30.0) } else { origin + gaussian_vec(rng, 1.0) };
            match Ray::new(origin, aim - origin) {
                Ok(ray) => SessionEvent::PlaceEntry { ray },
                Err(_) => SessionEvent::Next,
            }
        }
        85..=88 => SessionEvent::DeleteEntry,
        _ => {
            let pose = MarkerPose::new(
                random_rotation(rng),
                scene.head_mesh().vertex_centroid().coords + gaussian_vec(rng, 120.0),
            );
            SessionEvent::MarkerUpdate { pose }
        }
    }
}

#[derive(Debug, Default)]
pub struct FuzzStats {
    pub events: usize,
    pub accepted: usize,
    pub violations: Vec<String>,
    pub reached_tracking: usize,
}

/// Dispatches `events` random events, checking every invariant after each.
pub fn fuzz_session(seed: u64, events: usize) -> FuzzStats {
    use ventronav::session::{dispatch, Phase};
    let ctx = phantom_ctx();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut state = SessionState::new();
    let mut stats = FuzzStats::default();
    for n in 0..events {
        let event = random_event(&mut rng, &ctx, &state);
        stats.events += 1;
        match dispatch(&ctx, &state, &event) {
            Ok((next, report)) => {
                stats.accepted += 1;
                if matches!(event, SessionEvent::Reset) && next != SessionState::new() {
                    stats.violations.push(format!("event {n}: reset did not restore the initial state"));
                }
                if report.prompt != next.prompt() {
                    stats.violations.push(format!("event {n}: report prompt out of date"));
                }
                if next.phase == Phase::CatheterTracking && state.phase != Phase::CatheterTracking {
                    stats.reached_tracking += 1;
                }
                state = next;
            }
            Err(rej) => {
                if rej.phase != state.phase {
                    stats.violations.push(format!("event {n}: rejection reports the wrong phase"));
                }
            }
        }
        if let Err(v) = state.check_invariants() {
            stats.violations.push(format!("event {n} ({}): {v}", event.kind()));
        }
        if stats.violations.len() > 10 {
            break;
        }
    }
    stats
}
