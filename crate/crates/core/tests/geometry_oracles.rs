mod common;

use approx::assert_relative_eq;
use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ventronav::geometry::primitives::{cube_mesh, icosphere};
use ventronav::geometry::{
    apply_transform, point_mesh_distance, project, ray_mesh_intersect, unproject, CameraIntrinsics, CameraPose, Pixel,
    Point3, Ray, Rotation, SimilarityTransform, TriangleMesh, Vec3,
};

fn intr500() -> CameraIntrinsics {
    CameraIntrinsics::new(500.0, 500.0, 0.0, 0.0, 1000, 1000).unwrap()
}

/// Largest gap between a sphere and its inscribed mesh: the sagitta of the
/// longest edge.
fn chord_tolerance(mesh: &TriangleMesh, r: f64) -> f64 {
    let longest = (0..mesh.triangle_count())
        .flat_map(|i| {
            let [a, b, c] = mesh.triangle(i);
            [(a - b).norm(), (b - c).norm(), (c - a).norm()]
        })
        .fold(0.0, f64::max);
    r - (r * r - longest * longest / 4.0).sqrt()
}

#[test]
fn apply_transform_examples() {
    let p = Point3::new(1.0, 2.0, 3.0);
    assert_eq!(apply_transform(&SimilarityTransform::identity(), &p), p);
    let s2 = SimilarityTransform::new(2.0, Rotation::identity(), Vec3::zeros()).unwrap();
    assert_eq!(apply_transform(&s2, &Point3::new(1.0, 0.0, 0.0)), Point3::new(2.0, 0.0, 0.0));

    let rz = Rotation::from_axis_angle(&Vec3::z(), std::f64::consts::FRAC_PI_2);
    let t = SimilarityTransform::new(1.0, rz, Vec3::new(1.0, 0.0, 0.0)).unwrap();
    let got = apply_transform(&t, &Point3::new(1.0, 0.0, 0.0));
    // Independent product with the hand-written matrix of Rz(90°).
    let m = [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
    let r = mat_vec(m, [1.0, 0.0, 0.0]);
    let want = Point3::new(r[0] + 1.0, r[1], r[2]);
    assert!((got - want).norm() < 1e-12);
    assert!((got - Point3::new(1.0, 1.0, 0.0)).norm() < 1e-12);
}

#[test]
fn project_examples() {
    let id = CameraPose::identity();
    let a = project(&intr500(), &id, &Point3::new(0.0, 0.0, 100.0)).unwrap();
    assert_eq!((a.pixel.u, a.pixel.v, a.depth), (0.0, 0.0, 100.0));
    let b = project(&intr500(), &id, &Point3::new(10.0, 0.0, 100.0)).unwrap();
    assert_relative_eq!(b.pixel.u, 50.0, epsilon = 1e-12);
    assert!(project(&intr500(), &id, &Point3::new(0.0, 0.0, -5.0)).is_err());
    let p = unproject(&intr500(), &id, Pixel { u: 50.0, v: 0.0 }, 100.0).unwrap();
    assert!((p - Point3::new(10.0, 0.0, 100.0)).norm() < 1e-12);
    assert!(unproject(&intr500(), &id, Pixel { u: 0.0, v: 0.0 }, 0.0).is_err());
}

#[test]
fn ray_hits_sphere_near_analytic_point() {
    let sphere = icosphere(80.0, 4);
    let tol = chord_tolerance(&sphere, 80.0);
    assert!(tol < 0.2, "chord tolerance {tol}");
    let ray = Ray::new(Point3::new(0.0, 0.0, 200.0), Vec3::new(0.0, 0.0, -1.0)).unwrap();
    let hit = ray_mesh_intersect(&ray, &sphere).unwrap();
    assert!((hit.point - Point3::new(0.0, 0.0, 80.0)).norm() <= tol);
    let away = Ray::new(Point3::new(0.0, 0.0, 200.0), Vec3::new(0.0, 0.0, 1.0)).unwrap();
    assert!(ray_mesh_intersect(&away, &sphere).is_none());
}

#[test]
fn distance_to_sphere_near_analytic_value() {
    let sphere = icosphere(80.0, 4);
    let tol = chord_tolerance(&sphere, 80.0);
    let d = point_mesh_distance(&Point3::new(0.0, 0.0, 100.0), &sphere);
    assert!((d.distance - 20.0).abs() <= tol);
    let v = sphere.vertices()[17];
    assert_eq!(point_mesh_distance(&v, &sphere).distance, 0.0);
}

fn blob(rng: &mut ChaCha8Rng) -> TriangleMesh {
    let base = icosphere(60.0, 2);
    let v = base.vertices().iter().map(|p| p * rng.random_range(0.8..1.25)).collect();
    TriangleMesh::new(v, base.triangles().to_vec()).unwrap()
}

#[test]
fn ray_queries_equal_exhaustive_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let meshes = [random_soup(&mut rng, 1000), blob(&mut rng), icosphere(80.0, 2)];
    for mesh in &meshes {
        assert!(mesh.triangle_count() <= 1000);
        let mut hits = 0;
        for _ in 0..1000 {
            let o = Point3::from(gaussian_vec(&mut rng, 120.0));
            // Half the rays aim at a random point of the mesh so most hit.
            let dir = if rng.random_bool(0.5) {
                let target = mesh.vertices()[rng.random_range(0..mesh.vertices().len())] + gaussian_vec(&mut rng, 5.0);
                target - o
            } else {
                gaussian_vec(&mut rng, 1.0)
            };
            let ray = Ray::new(o, dir).unwrap();
            let got = ray_mesh_intersect(&ray, mesh);
            let want = ref_ray_mesh(&ray.origin, ray.direction(), mesh);
            match (got, want) {
                (None, None) => {}
                (Some(h), Some((t, i))) => {
                    hits += 1;
                    assert_eq!(h.triangle, i);
                    assert!((h.t - t).abs() <= 1e-9 * t.max(1.0), "t {} vs {}", h.t, t);
                }
                (g, w) => panic!("mismatch: {g:?} vs {w:?}"),
            }
        }
        assert!(hits > 300, "only {hits} hits");
    }
}

#[test]
fn distance_queries_equal_exhaustive_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let meshes = [random_soup(&mut rng, 1000), blob(&mut rng), cube_mesh(50.0)];
    for mesh in &meshes {
        for k in 0..1000 {
            let p = if k % 4 == 0 {
                // Near-surface queries exercise the edge and vertex regions.
                mesh.vertices()[rng.random_range(0..mesh.vertices().len())] + gaussian_vec(&mut rng, 0.5)
            } else {
                Point3::from(gaussian_vec(&mut rng, 100.0))
            };
            let got = point_mesh_distance(&p, mesh);
            let (d, _) = ref_point_mesh(&p, mesh);
            assert!((got.distance - d).abs() <= 1e-9, "{} vs {}", got.distance, d);
            assert!(((got.point - p).norm() - got.distance).abs() <= 1e-9);
        }
    }
}

#[test]
fn inside_test_on_closed_meshes() {
    let sphere = icosphere(80.0, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..500 {
        let p = Point3::from(gaussian_vec(&mut rng, 60.0));
        let r = p.coords.norm();
        if (r - 80.0).abs() < 1.0 {
            continue;
        }
        assert_eq!(sphere.contains(&p).unwrap(), r < 80.0, "r = {r}");
    }
    let soup = random_soup(&mut rng, 10);
    assert!(soup.contains(&Point3::origin()).is_err());
}

fn finite_point() -> impl Strategy<Value = Point3> {
    prop::array::uniform3(-1000.0..1000.0f64)
        .prop_map(|a| Point3::new(a[0], a[1], a[2]))
        .prop_filter("inside the 1000 mm ball", |p| p.coords.norm() <= 1000.0)
}

fn similarity() -> impl Strategy<Value = SimilarityTransform> {
    (
        0.1..10.0f64,
        prop::array::uniform3(-1.0..1.0f64),
        -std::f64::consts::PI..std::f64::consts::PI,
        prop::array::uniform3(-500.0..500.0f64),
    )
        .prop_filter_map("non-zero axis", |(s, ax, ang, t)| {
            let axis = Vec3::new(ax[0], ax[1], ax[2]);
            (axis.norm() > 1e-3).then(|| {
                SimilarityTransform::new(s, Rotation::from_axis_angle(&axis, ang), Vec3::new(t[0], t[1], t[2])).unwrap()
            })
        })
}

proptest! {
    #[test]
    fn compose_with_inverse_is_identity(t in similarity(), p in finite_point()) {
        let q = t.compose(&t.inverse()).apply(&p);
        prop_assert!((q - p).norm() < 1e-9);
        let r = t.inverse().apply(&t.apply(&p));
        prop_assert!((r - p).norm() < 1e-9);
    }

    #[test]
    fn distances_scale_by_s(t in similarity(), a in finite_point(), b in finite_point()) {
        let d = (a - b).norm();
        let d2 = (t.apply(&a) - t.apply(&b)).norm();
        prop_assert!((d2 - t.scale * d).abs() <= 1e-9 * (t.scale * d).max(1.0));
    }

    #[test]
    fn rotations_stay_proper(t in similarity(), u in similarity()) {
        let m = t.compose(&u).rotation.matrix();
        prop_assert!((m.transpose() * m - nalgebra::Matrix3::identity()).abs().max() < 1e-9);
        prop_assert!((m.determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn project_unproject_round_trip(
        x in -500.0..500.0f64, y in -500.0..500.0f64, z in 1.0..2000.0f64,
        ax in prop::array::uniform3(-1.0..1.0f64), ang in -3.0..3.0f64,
        t in prop::array::uniform3(-300.0..300.0f64),
    ) {
        let axis = Vec3::new(ax[0], ax[1], ax[2]);
        prop_assume!(axis.norm() > 1e-3);
        let pose = CameraPose::new(Rotation::from_axis_angle(&axis, ang), Vec3::new(t[0], t[1], t[2]));
        let intr = CameraIntrinsics::phone_default();
        let world = pose.apply(&Point3::new(x, y, z));
        let pr = project(&intr, &pose, &world).unwrap();
        let back = unproject(&intr, &pose, pr.pixel, pr.depth).unwrap();
        prop_assert!((back - world).norm() < 1e-9);
        let again = project(&intr, &pose, &back).unwrap();
        // Grazing points project far off-sensor; compare pixels relative to their size.
        let px_tol = |p: f64| 1e-12 * p.abs().max(1e3);
        prop_assert!((again.pixel.u - pr.pixel.u).abs() < px_tol(pr.pixel.u));
        prop_assert!((again.pixel.v - pr.pixel.v).abs() < px_tol(pr.pixel.v));
        prop_assert!((again.depth - pr.depth).abs() < 1e-9);
    }
}
