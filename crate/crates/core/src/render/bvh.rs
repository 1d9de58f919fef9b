//! Bounding-volume hierarchy over one mesh's triangles.

use crate::geometry::{Aabb, TriangleMesh, Vec3};

const LEAF_TRIANGLES: usize = 4;
const PARALLEL_EPS: f64 = 1e-9;

#[derive(Clone, Debug)]
struct Node {
    bounds: Aabb,
    // Leaf: `start..start + count` into `order`. Interior: children at `left`, `left + 1`.
    start: usize,
    count: usize,
    left: usize,
}

/// Closest intersection along a ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub face: usize,
    /// Barycentric weights of the face's second and third vertices.
    pub u: f64,
    pub v: f64,
}

#[derive(Clone, Debug)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<usize>,
    triangles: Vec<[Vec3; 3]>,
}

impl Bvh {
    /// Median-split construction along the longest centroid axis.
    pub fn new(mesh: &TriangleMesh) -> Self {
        let triangles: Vec<[Vec3; 3]> = (0..mesh.faces.len()).map(|f| mesh.triangle(f)).collect();
        let centroids: Vec<Vec3> = triangles.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
        let mut bvh = Self { nodes: Vec::new(), order: (0..triangles.len()).collect(), triangles };
        if !bvh.triangles.is_empty() {
            bvh.nodes.push(Node { bounds: Aabb::new(Vec3::zeros(), Vec3::zeros()), start: 0, count: 0, left: 0 });
            bvh.build(0, 0, bvh.order.len(), &centroids);
        }
        bvh
    }

    fn range_bounds(&self, start: usize, end: usize) -> Aabb {
        Aabb::from_points(self.order[start..end].iter().flat_map(|&f| self.triangles[f].iter()))
            .expect("non-empty range")
    }

    fn build(&mut self, node: usize, start: usize, end: usize, centroids: &[Vec3]) {
        let bounds = self.range_bounds(start, end);
        let count = end - start;
        if count <= LEAF_TRIANGLES {
            self.nodes[node] = Node { bounds, start, count, left: 0 };
            return;
        }
        let cb = Aabb::from_points(self.order[start..end].iter().map(|&f| &centroids[f])).expect("non-empty");
        let axis = cb.extent().imax();
        let mid = start + count / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b))
        });
        let left = self.nodes.len();
        let placeholder = Node { bounds, start: 0, count: 0, left: 0 };
        self.nodes.push(placeholder.clone());
        self.nodes.push(placeholder);
        self.nodes[node] = Node { bounds, start, count: 0, left };
        self.build(left, start, mid, centroids);
        self.build(left + 1, mid, end, centroids);
    }

    /// Nearest hit with `t` in `(t_min, t_max)`; equal `t` resolves to the
    /// lower face index.
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3, t_min: f64, t_max: f64) -> Option<Hit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<Hit> = None;
        let mut limit = t_max;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if !slab_test(&node.bounds, origin, &inv, t_min, limit) {
                continue;
            }
            if node.count > 0 {
                for &f in &self.order[node.start..node.start + node.count] {
                    if let Some((t, u, v)) = intersect_triangle(&self.triangles[f], origin, dir) {
                        if t <= t_min || t > limit {
                            continue;
                        }
                        let better = match best {
                            None => true,
                            Some(b) => t < b.t || (t == b.t && f < b.face),
                        };
                        if better {
                            best = Some(Hit { t, face: f, u, v });
                            limit = t;
                        }
                    }
                }
            } else {
                stack.push(node.left + 1);
                stack.push(node.left);
            }
        }
        best
    }
}

#[inline]
fn slab_test(b: &Aabb, origin: &Vec3, inv: &Vec3, t_min: f64, t_max: f64) -> bool {
    let mut lo = t_min;
    let mut hi = t_max;
    for a in 0..3 {
        let t0 = (b.min[a] - origin[a]) * inv[a];
        let t1 = (b.max[a] - origin[a]) * inv[a];
        let (near, far) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        // NaN (zero direction component with origin on a slab plane) keeps the box.
        if near > lo {
            lo = near;
        }
        if far < hi {
            hi = far;
        }
        if lo > hi {
            return false;
        }
    }
    true
}

/// Möller–Trumbore ray/triangle test returning `(t, u, v)`.
#[inline]
pub fn intersect_triangle(tri: &[Vec3; 3], origin: &Vec3, dir: &Vec3) -> Option<(f64, f64, f64)> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < PARALLEL_EPS * e1.norm() * e2.norm() {
        return None;
    }
    let inv_det = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&p) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv_det;
    Some((t, u, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenes;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn agrees_with_brute_force() {
        let mesh = scenes::figurine();
        let bvh = Bvh::new(&mesh);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let origin = Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)) * 1.5;
            let target = Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
            let dir = (target - origin).normalize();
            let mut best: Option<(f64, usize)> = None;
            for f in 0..mesh.faces.len() {
                if let Some((t, _, _)) = intersect_triangle(&mesh.triangle(f), &origin, &dir) {
                    if t > 0.0 && best.is_none_or(|(bt, bf)| t < bt || (t == bt && f < bf)) {
                        best = Some((t, f));
                    }
                }
            }
            let hit = bvh.intersect(&origin, &dir, 0.0, f64::INFINITY).map(|h| (h.t, h.face));
            assert_eq!(hit, best);
        }
    }
}
