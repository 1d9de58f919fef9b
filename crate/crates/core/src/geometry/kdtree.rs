use super::{PointCloud, Vec3};

const LEAF_SIZE: usize = 8;

/// Balanced k-d tree over a point cloud.
///
/// The tree is implicit: `order` is a permutation of point indices arranged so
/// that the median of every range `[lo, hi)` sits at `(lo + hi) / 2`, with the
/// split axis for that node stored alongside it. Ranges of at most
/// `LEAF_SIZE` points are scanned linearly.
#[derive(Clone, Debug)]
pub struct SpatialIndex {
    points: Vec<Vec3>,
    order: Vec<u32>,
    axis: Vec<u8>,
}

impl SpatialIndex {
    pub fn new(cloud: &PointCloud) -> Self {
        let n = cloud.points.len();
        let mut index = Self {
            points: cloud.points.clone(),
            order: (0..n as u32).collect(),
            axis: vec![0; n],
        };
        index.build(0, n);
        index
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build(&mut self, lo: usize, hi: usize) {
        if hi - lo <= LEAF_SIZE {
            return;
        }
        let mut min = Vec3::repeat(f64::INFINITY);
        let mut max = Vec3::repeat(f64::NEG_INFINITY);
        for &i in &self.order[lo..hi] {
            let p = &self.points[i as usize];
            min = min.inf(p);
            max = max.sup(p);
        }
        let axis = (max - min).imax();
        let mid = (lo + hi) / 2;
        let points = &self.points;
        self.order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            points[a as usize][axis]
                .total_cmp(&points[b as usize][axis])
                .then(a.cmp(&b))
        });
        self.axis[mid] = axis as u8;
        self.build(lo, mid);
        self.build(mid + 1, hi);
    }

    /// Nearest indexed point to `query` as `(point index, squared distance)`.
    /// Equal distances resolve to the smallest point index. `None` when empty.
    pub fn nearest(&self, query: &Vec3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, self.points.len(), query, &mut best);
        Some(best)
    }

    fn consider(&self, i: u32, query: &Vec3, best: &mut (usize, f64)) {
        let d = (self.points[i as usize] - query).norm_squared();
        let i = i as usize;
        if d < best.1 || (d == best.1 && i < best.0) {
            *best = (i, d);
        }
    }

    fn search(&self, lo: usize, hi: usize, query: &Vec3, best: &mut (usize, f64)) {
        if hi - lo <= LEAF_SIZE {
            for &i in &self.order[lo..hi] {
                self.consider(i, query, best);
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let node = self.order[mid];
        let axis = self.axis[mid] as usize;
        let diff = query[axis] - self.points[node as usize][axis];
        let (near, far) = if diff < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.search(near.0, near.1, query, best);
        self.consider(node, query, best);
        // Equal-distance candidates on the far side still matter for tie-breaking.
        if diff * diff <= best.1 {
            self.search(far.0, far.1, query, best);
        }
    }
}
