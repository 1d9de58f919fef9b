//! Marching cubes over a sampled scalar field.

use std::collections::HashMap;

use rayon::prelude::*;

use super::ReconstructError;
use crate::geometry::{TriangleMesh, Vec3, VoxelGrid};
use crate::mc_table::{CORNERS, EDGES, TRI_TABLE};

/// Scalar samples on a regular lattice: sample `(i, j, k)` sits at
/// `origin + (i, j, k) * spacing`. Values above the iso level are inside.
#[derive(Clone, Debug)]
pub struct ScalarField {
    pub origin: Vec3,
    pub spacing: f64,
    pub dims: [usize; 3],
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn from_fn(origin: Vec3, spacing: f64, dims: [usize; 3], f: impl Fn(&Vec3) -> f64 + Sync) -> Self {
        let [nx, ny, nz] = dims;
        let values = (0..nx * ny * nz)
            .into_par_iter()
            .map(|idx| {
                let (i, j, k) = (idx % nx, (idx / nx) % ny, idx / (nx * ny));
                f(&(origin + Vec3::new(i as f64, j as f64, k as f64) * spacing))
            })
            .collect();
        Self { origin, spacing, dims, values }
    }

    #[inline]
    fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[i + self.dims[0] * (j + self.dims[1] * k)]
    }
}

// Edge identity shared by neighbouring cells: lattice index of the edge's
// lower endpoint plus the axis it runs along.
type EdgeKey = (usize, u8);

/// Triangulates the `iso` level set of `field`. Output vertices are shared
/// between cells and faces wind counter-clockwise seen from outside.
pub fn marching_cubes(field: &ScalarField, iso: f64) -> TriangleMesh {
    let [nx, ny, nz] = field.dims;
    if nx < 2 || ny < 2 || nz < 2 {
        return TriangleMesh::default();
    }
    let layers: Vec<Vec<[EdgeKey; 3]>> = (0..nz - 1)
        .into_par_iter()
        .map(|k| {
            let mut tris = Vec::new();
            for j in 0..ny - 1 {
                for i in 0..nx - 1 {
                    let mut case = 0usize;
                    for (c, off) in CORNERS.iter().enumerate() {
                        if field.at(i + off[0], j + off[1], k + off[2]) < iso {
                            case |= 1 << c;
                        }
                    }
                    if case == 0 || case == 255 {
                        continue;
                    }
                    let row = &TRI_TABLE[case];
                    for t in row.chunks_exact(3).take_while(|t| t[0] >= 0) {
                        let key = |e: i8| edge_key(field, [i, j, k], e as usize);
                        tris.push([key(t[0]), key(t[1]), key(t[2])]);
                    }
                }
            }
            tris
        })
        .collect();

    let mut ids: HashMap<EdgeKey, usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for tri in layers.into_iter().flatten() {
        let face = tri.map(|key| {
            *ids.entry(key).or_insert_with(|| {
                vertices.push(edge_vertex(field, key, iso));
                vertices.len() - 1
            })
        });
        faces.push(face);
    }
    TriangleMesh { vertices, faces, vertex_colors: None }
}

fn edge_key(field: &ScalarField, cell: [usize; 3], edge: usize) -> EdgeKey {
    let [a, b] = EDGES[edge];
    let (ca, cb) = (CORNERS[a], CORNERS[b]);
    let lo = [0, 1, 2].map(|d| cell[d] + ca[d].min(cb[d]));
    let axis = (0..3).find(|&d| ca[d] != cb[d]).expect("edge spans one axis");
    (lo[0] + field.dims[0] * (lo[1] + field.dims[1] * lo[2]), axis as u8)
}

fn edge_vertex(field: &ScalarField, (index, axis): EdgeKey, iso: f64) -> Vec3 {
    let [nx, ny, _] = field.dims;
    let (i, j, k) = (index % nx, (index / nx) % ny, index / (nx * ny));
    let mut hi = [i, j, k];
    hi[axis as usize] += 1;
    let v0 = field.at(i, j, k);
    let v1 = field.at(hi[0], hi[1], hi[2]);
    let t = if v1 == v0 { 0.5 } else { ((iso - v0) / (v1 - v0)).clamp(0.0, 1.0) };
    let p0 = field.origin + Vec3::new(i as f64, j as f64, k as f64) * field.spacing;
    let mut p = p0;
    p[axis as usize] += t * field.spacing;
    p
}

/// Surface of an occupancy grid: occupied cells are 1, empty 0, sampled at
/// voxel centers. The grid is padded with one empty layer on every side so
/// the result is closed.
pub fn extract_mesh(grid: &VoxelGrid, iso: f64) -> Result<TriangleMesh, ReconstructError> {
    if grid.occupied_count() == 0 {
        return Err(ReconstructError::NothingToExtract);
    }
    let [nx, ny, nz] = grid.dims;
    let dims = [nx + 2, ny + 2, nz + 2];
    let mut values = vec![0.0; dims[0] * dims[1] * dims[2]];
    for idx in grid.occupancy.iter_ones() {
        let [i, j, k] = grid.coords(idx);
        values[(i + 1) + dims[0] * ((j + 1) + dims[1] * (k + 1))] = 1.0;
    }
    let origin = grid.origin - Vec3::repeat(0.5 * grid.cell_size);
    let field = ScalarField { origin, spacing: grid.cell_size, dims, values };
    Ok(marching_cubes(&field, iso))
}

/// Checks that every undirected edge is shared by exactly two faces.
pub fn is_watertight(mesh: &TriangleMesh) -> bool {
    let mut counts: HashMap<(usize, usize), u32> = HashMap::new();
    for f in &mesh.faces {
        for e in 0..3 {
            let (a, b) = (f[e], f[(e + 1) % 3]);
            *counts.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    !counts.is_empty() && counts.values().all(|&c| c == 2)
}

pub fn euler_characteristic(mesh: &TriangleMesh) -> i64 {
    let mut edges = std::collections::HashSet::new();
    for f in &mesh.faces {
        for e in 0..3 {
            let (a, b) = (f[e], f[(e + 1) % 3]);
            edges.insert((a.min(b), a.max(b)));
        }
    }
    mesh.vertices.len() as i64 - edges.len() as i64 + mesh.faces.len() as i64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{bounding_box, voxelize, Aabb};
    use crate::harness::scenes;
    use proptest::prelude::*;

    fn grid_from_bits(dims: [usize; 3], bits: &[bool]) -> VoxelGrid {
        let mut g = VoxelGrid::empty(Vec3::zeros(), 0.1, dims);
        for (i, &b) in bits.iter().enumerate() {
            g.occupancy.set(i, b);
        }
        g
    }

    #[test]
    fn single_voxel_is_closed_sphere_topology() {
        let mut g = VoxelGrid::empty(Vec3::zeros(), 1.0, [3, 3, 3]);
        g.set(1, 1, 1, true);
        let m = extract_mesh(&g, 0.5).unwrap();
        m.validate().unwrap();
        assert_eq!(m.faces.len(), 8);
        assert_eq!(euler_characteristic(&m), 2);
        assert!(is_watertight(&m));
        assert!(m.signed_volume() > 0.0);
    }

    #[test]
    fn empty_grid_is_error() {
        let g = VoxelGrid::empty(Vec3::zeros(), 1.0, [4, 4, 4]);
        assert!(matches!(extract_mesh(&g, 0.5), Err(ReconstructError::NothingToExtract)));
    }

    #[test]
    fn sphere_vertices_near_radius() {
        let sphere = scenes::icosphere(0.4, 5);
        let bounds = Aabb::new(Vec3::repeat(-0.5), Vec3::repeat(0.5));
        let grid = voxelize(&sphere, 128, &bounds).unwrap();
        let m = extract_mesh(&grid, 0.5).unwrap();
        let tol = 1.5 * grid.cell_size;
        for v in &m.vertices {
            assert!((v.norm() - 0.4).abs() <= tol, "{}", v.norm());
        }
        assert!(is_watertight(&m));
        assert_eq!(euler_characteristic(&m), 2);
        assert!(m.signed_volume() > 0.0);
    }

    #[test]
    fn touching_boundary_still_closed() {
        let g = grid_from_bits([2, 2, 2], &[true; 8]);
        let m = extract_mesh(&g, 0.5).unwrap();
        assert!(is_watertight(&m));
        let bb = bounding_box(&m).unwrap();
        assert!((bb.min - Vec3::repeat(0.0)).amax() < 1e-12);
        assert!((bb.max - Vec3::repeat(0.2)).amax() < 1e-12);
    }

    #[test]
    fn diagonal_neighbours_are_edge_manifold() {
        // Two voxels touching only along an edge and two touching at a corner.
        let mut g = VoxelGrid::empty(Vec3::zeros(), 1.0, [4, 4, 4]);
        g.set(0, 0, 0, true);
        g.set(1, 1, 0, true);
        g.set(3, 3, 3, true);
        g.set(2, 2, 2, true);
        let m = extract_mesh(&g, 0.5).unwrap();
        assert!(is_watertight(&m));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn random_grids_are_watertight(bits in prop::collection::vec(any::<bool>(), 5 * 4 * 6)) {
            prop_assume!(bits.iter().any(|&b| b));
            let g = grid_from_bits([5, 4, 6], &bits);
            let m = extract_mesh(&g, 0.5).unwrap();
            m.validate().unwrap();
            prop_assert!(is_watertight(&m));
        }
    }
}
