//! Axis-aligned bounding-box hierarchy over mesh triangles.
//!
//! Internal to [`TriangleMesh`](super::TriangleMesh). Queries must return the
//! same triangle and value as a linear scan, so pruning is conservative: boxes
//! are padded and ties are resolved on triangle index.

use super::{Point3, Vec3};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Self { min: Vec3::repeat(f64::INFINITY), max: Vec3::repeat(f64::NEG_INFINITY) }
    }

    fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    fn merge(&mut self, o: &Aabb) {
        self.min = self.min.inf(&o.min);
        self.max = self.max.sup(&o.max);
    }

    fn padded(mut self) -> Self {
        let extent = (self.max - self.min).amax().max(1.0);
        let pad = Vec3::repeat(1e-9 * extent);
        self.min -= pad;
        self.max += pad;
        self
    }

    /// Squared distance from `p` to the box (0 inside).
    pub fn distance_squared(&self, p: &Vec3) -> f64 {
        let mut d2 = 0.0;
        for k in 0..3 {
            let v = p[k];
            let e = if v < self.min[k] {
                self.min[k] - v
            } else if v > self.max[k] {
                v - self.max[k]
            } else {
                0.0
            };
            d2 += e * e;
        }
        d2
    }

    /// Entry parameter of the ray into the box, or `None` when it misses or
    /// the box lies entirely behind `t_max`.
    pub fn ray_entry(&self, origin: &Vec3, inv_dir: &Vec3, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0_f64;
        let mut t1 = t_max;
        for k in 0..3 {
            let (a, b) = if inv_dir[k].is_infinite() {
                // Parallel to this slab.
                if origin[k] < self.min[k] || origin[k] > self.max[k] {
                    return None;
                }
                continue;
            } else {
                let a = (self.min[k] - origin[k]) * inv_dir[k];
                let b = (self.max[k] - origin[k]) * inv_dir[k];
                if a <= b {
                    (a, b)
                } else {
                    (b, a)
                }
            };
            t0 = t0.max(a);
            t1 = t1.min(b);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Bvh {
    nodes: Vec<Node>,
    /// Triangle indices, permuted so each leaf owns a contiguous range.
    order: Vec<usize>,
}

impl Bvh {
    pub fn build(vertices: &[Point3], triangles: &[[u32; 3]]) -> Self {
        let boxes: Vec<Aabb> = triangles
            .iter()
            .map(|t| {
                let mut b = Aabb::empty();
                for &i in t {
                    b.grow(&vertices[i as usize].coords);
                }
                b.padded()
            })
            .collect();
        let centroids: Vec<Vec3> = boxes.iter().map(|b| (b.min + b.max) * 0.5).collect();
        let mut order: Vec<usize> = (0..triangles.len()).collect();
        let mut nodes = Vec::with_capacity(2 * triangles.len() / LEAF_SIZE + 1);
        if !triangles.is_empty() {
            build_node(&mut nodes, &mut order, 0, triangles.len(), &boxes, &centroids);
        }
        Self { nodes, order }
    }

    /// Depth-first traversal, nearer children first. `keep` returns a priority
    /// for boxes worth visiting and `None` for boxes that can be pruned.
    pub fn traverse<F, G>(&self, mut keep: F, mut leaf: G)
    where
        F: FnMut(&Aabb) -> Option<f64>,
        G: FnMut(&[usize]),
    {
        if self.nodes.is_empty() {
            return;
        }
        let mut stack: Vec<(usize, f64)> = Vec::with_capacity(64);
        if let Some(p) = keep(self.nodes[0].bounds()) {
            stack.push((0, p));
        }
        while let Some((idx, _)) = stack.pop() {
            // Re-check: the bound may have tightened since the push.
            let node = &self.nodes[idx];
            if keep(node.bounds()).is_none() {
                continue;
            }
            match *node {
                Node::Leaf { start, end, .. } => leaf(&self.order[start..end]),
                Node::Inner { left, right, .. } => {
                    let l = keep(self.nodes[left].bounds());
                    let r = keep(self.nodes[right].bounds());
                    match (l, r) {
                        (Some(a), Some(b)) => {
                            // Push the farther child first so the nearer pops first.
                            if a <= b {
                                stack.push((right, b));
                                stack.push((left, a));
                            } else {
                                stack.push((left, a));
                                stack.push((right, b));
                            }
                        }
                        (Some(a), None) => stack.push((left, a)),
                        (None, Some(b)) => stack.push((right, b)),
                        (None, None) => {}
                    }
                }
            }
        }
    }
}

fn build_node(
    nodes: &mut Vec<Node>,
    order: &mut [usize],
    start: usize,
    end: usize,
    boxes: &[Aabb],
    centroids: &[Vec3],
) -> usize {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &t in &order[start..end] {
        bounds.merge(&boxes[t]);
        cbounds.grow(&centroids[t]);
    }
    let idx = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { bounds, start, end });
        return idx;
    }
    let extent = cbounds.max - cbounds.min;
    let axis = extent.imax();
    if extent[axis] <= 0.0 {
        nodes.push(Node::Leaf { bounds, start, end });
        return idx;
    }
    let mid = (start + end) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b))
    });
    nodes.push(Node::Leaf { bounds, start, end });
    let left = build_node(nodes, order, start, mid, boxes, centroids);
    let right = build_node(nodes, order, mid, end, boxes, centroids);
    nodes[idx] = Node::Inner { bounds, left, right };
    idx
}
