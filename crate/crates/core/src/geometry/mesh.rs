use std::cell::Cell;
use std::collections::HashMap;

use super::bvh::Bvh;
use super::{GeometryError, Point3, Ray, SimilarityTransform, Vec3};

const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// Indexed triangle mesh in millimetres with an internal AABB hierarchy.
///
/// Degenerate triangles (area below 1e-12 mm²) are dropped at construction.
/// The mesh is immutable afterwards and all queries take `&self`.
#[derive(Debug, Clone)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    triangles: Vec<[u32; 3]>,
    watertight: bool,
    bvh: Bvh,
}

impl PartialEq for TriangleMesh {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.triangles == other.triangles
    }
}

/// Nearest ray hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub point: Point3,
    /// Ray parameter (distance along the unit direction).
    pub t: f64,
    pub triangle: usize,
}

/// Closest surface point to a query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub distance: f64,
    pub point: Point3,
    pub triangle: usize,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[u32; 3]>) -> Result<Self, GeometryError> {
        if !vertices.iter().all(|p| p.coords.iter().all(|v| v.is_finite())) {
            return Err(GeometryError::NonFinite);
        }
        let n = vertices.len();
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i as usize >= n)) {
            return Err(GeometryError::IndexOutOfRange { triangle: *t, vertices: n });
        }
        let before = triangles.len();
        let triangles: Vec<[u32; 3]> =
            triangles.into_iter().filter(|t| triangle_area(&vertices, t) >= MIN_TRIANGLE_AREA).collect();
        if triangles.len() != before {
            log::debug!("dropped {} degenerate triangles", before - triangles.len());
        }
        if triangles.is_empty() {
            return Err(GeometryError::EmptyMesh);
        }
        let watertight = edges_closed(&triangles);
        let bvh = Bvh::build(&vertices, &triangles);
        Ok(Self { vertices, triangles, watertight, bvh })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Every undirected edge is shared by exactly two triangles.
    pub fn is_watertight(&self) -> bool {
        self.watertight
    }

    pub fn triangle(&self, i: usize) -> [Point3; 3] {
        let t = self.triangles[i];
        [self.vertices[t[0] as usize], self.vertices[t[1] as usize], self.vertices[t[2] as usize]]
    }

    /// Unit normal following the winding order.
    pub fn face_normal(&self, i: usize) -> Vec3 {
        let [a, b, c] = self.triangle(i);
        (b - a).cross(&(c - a)).normalize()
    }

    pub fn triangle_area(&self, i: usize) -> f64 {
        triangle_area(&self.vertices, &self.triangles[i])
    }

    pub fn bounds(&self) -> (Point3, Point3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(&v.coords);
            hi = hi.sup(&v.coords);
        }
        (Point3::from(lo), Point3::from(hi))
    }

    /// Mean of the vertex positions.
    pub fn vertex_centroid(&self) -> Point3 {
        let sum: Vec3 = self.vertices.iter().map(|p| p.coords).sum();
        Point3::from(sum / self.vertices.len() as f64)
    }

    /// Copy of the mesh with every vertex mapped through `t`.
    pub fn transformed(&self, t: &SimilarityTransform) -> Self {
        let vertices: Vec<Point3> = self.vertices.iter().map(|p| t.apply(p)).collect();
        let bvh = Bvh::build(&vertices, &self.triangles);
        Self { vertices, triangles: self.triangles.clone(), watertight: self.watertight, bvh }
    }

    /// Nearest hit with positive ray parameter. Equal parameters resolve to
    /// the lowest triangle index.
    pub fn ray_intersect(&self, ray: &Ray) -> Option<RayHit> {
        let origin = ray.origin.coords;
        let dir = *ray.direction();
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let best: Cell<Option<(f64, usize)>> = Cell::new(None);
        self.bvh.traverse(
            |b| {
                let limit = best.get().map_or(f64::INFINITY, |(t, _)| t);
                b.ray_entry(&origin, &inv, limit)
            },
            |tris| {
                for &i in tris {
                    if let Some(t) = self.intersect_triangle(i, &ray.origin, &dir) {
                        if best.get().is_none_or(|(bt, bi)| t < bt || (t == bt && i < bi)) {
                            best.set(Some((t, i)));
                        }
                    }
                }
            },
        );
        best.get().map(|(t, triangle)| RayHit { point: ray.at(t), t, triangle })
    }

    /// Number of triangles crossed by the ray at positive parameter.
    pub fn ray_crossings(&self, ray: &Ray) -> usize {
        let origin = ray.origin.coords;
        let dir = *ray.direction();
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut count = 0;
        self.bvh.traverse(
            |b| b.ray_entry(&origin, &inv, f64::INFINITY),
            |tris| {
                count += tris.iter().filter(|&&i| self.intersect_triangle(i, &ray.origin, &dir).is_some()).count();
            },
        );
        count
    }

    /// Closest point on the surface. Equal distances resolve to the lowest
    /// triangle index.
    pub fn closest_point(&self, p: &Point3) -> SurfacePoint {
        let best: Cell<Option<(f64, usize, Point3)>> = Cell::new(None);
        self.bvh.traverse(
            |b| {
                let d2 = b.distance_squared(&p.coords);
                match best.get() {
                    Some((bd2, _, _)) if d2 > bd2 => None,
                    _ => Some(d2),
                }
            },
            |tris| {
                for &i in tris {
                    let [a, b, c] = self.triangle(i);
                    let q = closest_point_on_triangle(p, &a, &b, &c);
                    let d2 = (q - p).norm_squared();
                    if best.get().is_none_or(|(bd2, bi, _)| d2 < bd2 || (d2 == bd2 && i < bi)) {
                        best.set(Some((d2, i, q)));
                    }
                }
            },
        );
        let (d2, triangle, point) = best.get().expect("mesh is never empty");
        SurfacePoint { distance: d2.sqrt(), point, triangle }
    }

    /// Ray-parity inside test over three fixed, non-axis-aligned directions
    /// (majority vote). Requires a watertight mesh.
    pub fn contains(&self, p: &Point3) -> Result<bool, GeometryError> {
        if !self.watertight {
            return Err(GeometryError::MeshNotWatertight);
        }
        const DIRS: [[f64; 3]; 3] = [
            [0.5773502691896258, 0.5773502691896258, 0.5773502691896258],
            [-0.2672612419124244, 0.8017837257372732, -0.5345224838248488],
            [0.8164965809277261, -0.4082482904638631, -0.4082482904638631],
        ];
        let votes = DIRS
            .iter()
            .filter(|d| {
                let ray = Ray::new(*p, Vec3::new(d[0], d[1], d[2])).expect("fixed unit direction");
                self.ray_crossings(&ray) % 2 == 1
            })
            .count();
        Ok(votes >= 2)
    }

    fn intersect_triangle(&self, i: usize, origin: &Point3, dir: &Vec3) -> Option<f64> {
        let [a, b, c] = self.triangle(i);
        moller_trumbore(origin, dir, &a, &b, &c)
    }
}

/// Two-sided Möller–Trumbore test; returns the ray parameter for hits with t > 0.
pub(crate) fn moller_trumbore(origin: &Point3, dir: &Vec3, a: &Point3, b: &Point3, c: &Point3) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    if det.abs() < 1e-14 * e1.norm() * e2.norm() {
        return None;
    }
    let inv_det = 1.0 / det;
    let tvec = origin - a;
    let u = tvec.dot(&pvec) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(&e1);
    let v = dir.dot(&qvec) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&qvec) * inv_det;
    (t > 0.0).then_some(t)
}

/// Closest point on triangle `abc` to `p` (Voronoi-region walk).
pub(crate) fn closest_point_on_triangle(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> Point3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

fn triangle_area(vertices: &[Point3], t: &[u32; 3]) -> f64 {
    let a = vertices[t[0] as usize];
    let b = vertices[t[1] as usize];
    let c = vertices[t[2] as usize];
    0.5 * (b - a).cross(&(c - a)).norm()
}

fn edges_closed(triangles: &[[u32; 3]]) -> bool {
    let mut counts: HashMap<(u32, u32), u32> = HashMap::with_capacity(triangles.len() * 3 / 2);
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *counts.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    counts.values().all(|&c| c == 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives::{cube_mesh, icosphere};

    #[test]
    fn drops_degenerate_triangles() {
        let v = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
        ];
        let m = TriangleMesh::new(v, vec![[0, 1, 2], [0, 1, 3]]).unwrap();
        assert_eq!(m.triangle_count(), 1);
        assert!(!m.is_watertight());
    }

    #[test]
    fn rejects_bad_index_and_empty() {
        let v = vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)];
        assert!(matches!(TriangleMesh::new(v.clone(), vec![[0, 1, 5]]), Err(GeometryError::IndexOutOfRange { .. })));
        assert!(matches!(TriangleMesh::new(v, vec![]), Err(GeometryError::EmptyMesh)));
    }

    #[test]
    fn cube_is_watertight_and_contains_centre() {
        let m = cube_mesh(10.0);
        assert!(m.is_watertight());
        assert!(m.contains(&Point3::new(5.0, 5.0, 5.0)).unwrap());
        assert!(!m.contains(&Point3::new(15.0, 5.0, 5.0)).unwrap());
    }

    #[test]
    fn sphere_ray_hit_and_miss() {
        let m = icosphere(80.0, 4);
        let ray = Ray::new(Point3::new(0.0, 0.0, 200.0), -Vec3::z()).unwrap();
        let hit = m.ray_intersect(&ray).unwrap();
        // Chord sag for an order-4 icosphere of radius 80 is well under 0.2 mm.
        assert!((hit.point - Point3::new(0.0, 0.0, 80.0)).norm() < 0.2);
        let away = Ray::new(Point3::new(0.0, 0.0, 200.0), Vec3::z()).unwrap();
        assert!(m.ray_intersect(&away).is_none());
    }

    #[test]
    fn sphere_distance() {
        let m = icosphere(80.0, 4);
        let d = m.closest_point(&Point3::new(0.0, 0.0, 100.0)).distance;
        assert!((d - 20.0).abs() < 0.2, "{d}");
        let v = m.vertices()[7];
        assert_eq!(m.closest_point(&v).distance, 0.0);
    }

    #[test]
    fn open_mesh_refuses_inside_test() {
        let v = vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)];
        let m = TriangleMesh::new(v, vec![[0, 1, 2]]).unwrap();
        assert!(matches!(m.contains(&Point3::origin()), Err(GeometryError::MeshNotWatertight)));
    }
}
