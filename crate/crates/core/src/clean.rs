//! Floater removal by face-connectivity components.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::TriangleMesh;

pub const DEFAULT_MIN_FACE_FRACTION: f64 = 0.01;

#[derive(Debug, Error)]
pub enum CleanError {
    #[error("min_face_fraction must lie in (0, 1), got {0}")]
    InvalidThreshold(f64),
    #[error("cleaning would remove everything")]
    WouldRemoveEverything,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CleanReport {
    pub components_found: usize,
    pub components_removed: usize,
    pub faces_removed: usize,
    pub kept_face_fraction: f64,
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Faces grouped by shared vertices. Each component lists its faces in
/// ascending order; components are ordered by their smallest face.
pub fn connected_components(mesh: &TriangleMesh) -> Vec<Vec<usize>> {
    let mut ds = DisjointSet::new(mesh.vertices.len());
    for f in &mesh.faces {
        ds.union(f[0], f[1]);
        ds.union(f[0], f[2]);
    }
    let mut slot_of_root = vec![usize::MAX; mesh.vertices.len()];
    let mut components: Vec<Vec<usize>> = Vec::new();
    for (fi, f) in mesh.faces.iter().enumerate() {
        let root = ds.find(f[0]);
        if slot_of_root[root] == usize::MAX {
            slot_of_root[root] = components.len();
            components.push(Vec::new());
        }
        components[slot_of_root[root]].push(fi);
    }
    components
}

/// Drops components with fewer than `min_face_fraction` of all faces (or all
/// but the largest with `keep_largest_only`). The largest component always
/// survives; ties go to the one with the smaller first face.
pub fn clean(
    mesh: &TriangleMesh,
    min_face_fraction: f64,
    keep_largest_only: bool,
) -> Result<(TriangleMesh, CleanReport), CleanError> {
    if !(min_face_fraction > 0.0 && min_face_fraction < 1.0) {
        return Err(CleanError::InvalidThreshold(min_face_fraction));
    }
    let components = connected_components(mesh);
    let Some(largest) = components.iter().enumerate().max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(&a.0))).map(|(i, _)| i)
    else {
        return Err(CleanError::WouldRemoveEverything);
    };
    let total = mesh.faces.len();
    let min_faces = min_face_fraction * total as f64;
    let mut keep_face = vec![false; total];
    let mut removed = 0;
    for (ci, comp) in components.iter().enumerate() {
        let keep = ci == largest || (!keep_largest_only && comp.len() as f64 >= min_faces);
        if keep {
            for &f in comp {
                keep_face[f] = true;
            }
        } else {
            removed += 1;
        }
    }

    // Surviving vertices keep their relative order.
    let mut used = vec![false; mesh.vertices.len()];
    for (f, _) in mesh.faces.iter().zip(&keep_face).filter(|(_, &k)| k) {
        for &v in f {
            used[v] = true;
        }
    }
    let mut remap = vec![usize::MAX; mesh.vertices.len()];
    let mut vertices = Vec::new();
    for (v, _) in used.iter().enumerate().filter(|(_, &u)| u) {
        remap[v] = vertices.len();
        vertices.push(mesh.vertices[v]);
    }
    let colors = mesh
        .vertex_colors
        .as_ref()
        .map(|c| c.iter().zip(&used).filter(|(_, &u)| u).map(|(c, _)| *c).collect());
    let faces: Vec<[usize; 3]> =
        mesh.faces.iter().zip(&keep_face).filter(|(_, &k)| k).map(|(f, _)| f.map(|v| remap[v])).collect();
    let kept = faces.len();
    let report = CleanReport {
        components_found: components.len(),
        components_removed: removed,
        faces_removed: total - kept,
        kept_face_fraction: kept as f64 / total as f64,
    };
    Ok((TriangleMesh { vertices, faces, vertex_colors: colors }, report))
}
