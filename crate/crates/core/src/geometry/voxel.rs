use bitvec::prelude::*;
use rayon::prelude::*;

use super::{Aabb, GeometryError, TriangleMesh, Vec3};

/// Axis-aligned occupancy lattice with cubical cells. Cell `(i, j, k)` has
/// its center at `origin + (i + 0.5, j + 0.5, k + 0.5) * cell_size` and is
/// stored at linear index `i + nx * (j + ny * k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    pub origin: Vec3,
    pub cell_size: f64,
    pub dims: [usize; 3],
    pub occupancy: BitVec,
}

impl VoxelGrid {
    /// Empty lattice covering `bounds`, with the longest axis split into
    /// `resolution` cells.
    pub fn for_bounds(bounds: &Aabb, resolution: usize) -> Result<Self, GeometryError> {
        if !bounds.is_valid() {
            return Err(GeometryError::InvalidBounds);
        }
        if resolution == 0 {
            return Err(GeometryError::InvalidArgument("resolution must be positive".into()));
        }
        let longest = bounds.longest_extent();
        if !(longest > 0.0) {
            return Err(GeometryError::ZeroDiagonal);
        }
        let cell_size = longest / resolution as f64;
        let ext = bounds.extent();
        let dims = [0, 1, 2].map(|a| ((ext[a] / cell_size - 1e-9).ceil() as usize).clamp(1, resolution));
        Ok(Self::empty(bounds.min, cell_size, dims))
    }

    pub fn empty(origin: Vec3, cell_size: f64, dims: [usize; 3]) -> Self {
        Self { origin, cell_size, dims, occupancy: bitvec![0; dims[0] * dims[1] * dims[2]] }
    }

    pub fn len(&self) -> usize {
        self.occupancy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupancy.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.cell_size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.occupancy[self.index(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: bool) {
        let idx = self.index(i, j, k);
        self.occupancy.set(idx, value);
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.count_ones()
    }

    pub fn occupied_fraction(&self) -> f64 {
        self.occupied_count() as f64 / self.len() as f64
    }

    pub fn occupied_volume(&self) -> f64 {
        self.occupied_count() as f64 * self.cell_size.powi(3)
    }

    pub fn bounds(&self) -> Aabb {
        let ext = Vec3::new(self.dims[0] as f64, self.dims[1] as f64, self.dims[2] as f64) * self.cell_size;
        Aabb::new(self.origin, self.origin + ext)
    }

    pub fn same_layout(&self, other: &VoxelGrid) -> bool {
        self.origin == other.origin && self.cell_size == other.cell_size && self.dims == other.dims
    }

    /// True when every occupied cell of `self` is occupied in `other`.
    pub fn is_subset_of(&self, other: &VoxelGrid) -> bool {
        debug_assert!(self.same_layout(other));
        self.occupancy.iter_ones().all(|i| other.occupancy[i])
    }

    pub fn intersection_count(&self, other: &VoxelGrid) -> usize {
        (self.occupancy.clone() & other.occupancy.as_bitslice()).count_ones()
    }

    pub fn union_count(&self, other: &VoxelGrid) -> usize {
        (self.occupancy.clone() | other.occupancy.as_bitslice()).count_ones()
    }
}

/// Marks every cell whose center lies inside `mesh`, decided by parity of
/// crossings along a +x ray. Rows whose ray grazes an edge or vertex are
/// re-cast with a tiny deterministic jitter (at most three times) and are
/// left empty if every attempt grazes.
pub fn voxelize(mesh: &TriangleMesh, resolution: usize, bounds: &Aabb) -> Result<VoxelGrid, GeometryError> {
    if resolution < 2 {
        return Err(GeometryError::InvalidArgument("voxelize resolution must be at least 2".into()));
    }
    let mut grid = VoxelGrid::for_bounds(bounds, resolution)?;
    let [nx, ny, nz] = grid.dims;
    let cell = grid.cell_size;
    let origin = grid.origin;
    let margin = 1e-6 * cell;

    let mut row_faces: Vec<Vec<u32>> = vec![Vec::new(); ny * nz];
    for (fi, f) in mesh.faces.iter().enumerate() {
        let (mut ylo, mut yhi, mut zlo, mut zhi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &v in f {
            let p = mesh.vertices[v];
            ylo = ylo.min(p.y);
            yhi = yhi.max(p.y);
            zlo = zlo.min(p.z);
            zhi = zhi.max(p.z);
        }
        let Some((j0, j1)) = cell_range(ylo - margin, yhi + margin, origin.y, cell, ny) else { continue };
        let Some((k0, k1)) = cell_range(zlo - margin, zhi + margin, origin.z, cell, nz) else { continue };
        for k in k0..=k1 {
            for j in j0..=j1 {
                row_faces[j + ny * k].push(fi as u32);
            }
        }
    }

    let rows: Vec<Vec<bool>> = (0..ny * nz)
        .into_par_iter()
        .map(|row| {
            let faces = &row_faces[row];
            let mut inside = vec![false; nx];
            if faces.is_empty() {
                return inside;
            }
            let (j, k) = (row % ny, row / ny);
            let y = origin.y + (j as f64 + 0.5) * cell;
            let z = origin.z + (k as f64 + 0.5) * cell;
            let eps = 1e-7 * cell;
            const JITTER: [(f64, f64); 4] = [(0.0, 0.0), (0.754877666, 0.569840291), (-0.569840291, 0.754877666), (0.33, -0.91)];
            for (dy, dz) in JITTER {
                if let Some(mut xs) = row_crossings(mesh, faces, y + dy * eps, z + dz * eps) {
                    xs.sort_by(f64::total_cmp);
                    let mut next = 0;
                    for (i, slot) in inside.iter_mut().enumerate() {
                        let x = origin.x + (i as f64 + 0.5) * cell;
                        while next < xs.len() && xs[next] <= x {
                            next += 1;
                        }
                        *slot = (xs.len() - next) % 2 == 1;
                    }
                    return inside;
                }
            }
            inside
        })
        .collect();

    for (row, values) in rows.into_iter().enumerate() {
        let base = row * nx;
        for (i, v) in values.into_iter().enumerate() {
            if v {
                grid.occupancy.set(base + i, true);
            }
        }
    }
    Ok(grid)
}

fn cell_range(lo: f64, hi: f64, origin: f64, cell: f64, n: usize) -> Option<(usize, usize)> {
    // Cells whose centers fall in [lo, hi].
    let first = ((lo - origin) / cell - 0.5).ceil();
    let last = ((hi - origin) / cell - 0.5).floor();
    if last < 0.0 || first > (n - 1) as f64 || first > last {
        return None;
    }
    Some((first.max(0.0) as usize, last.min((n - 1) as f64) as usize))
}

/// Orientation of `p` against the directed edge `a -> b` in the yz plane,
/// evaluated with the endpoints in a canonical order so the two triangles
/// sharing an edge see exactly opposite values.
#[inline]
fn edge_function(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    let (lo, hi, sign) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };
    sign * ((hi.0 - lo.0) * (p.1 - lo.1) - (hi.1 - lo.1) * (p.0 - lo.0))
}

/// x-coordinates where the +x ray through `(y, z)` crosses the listed faces,
/// or `None` if the ray touches an edge or vertex.
fn row_crossings(mesh: &TriangleMesh, faces: &[u32], y: f64, z: f64) -> Option<Vec<f64>> {
    let p = (y, z);
    let mut xs = Vec::new();
    for &fi in faces {
        let [a, b, c] = mesh.triangle(fi as usize);
        let (pa, pb, pc) = ((a.y, a.z), (b.y, b.z), (c.y, c.z));
        let wa = edge_function(pb, pc, p);
        let wb = edge_function(pc, pa, p);
        let wc = edge_function(pa, pb, p);
        let has_neg = wa < 0.0 || wb < 0.0 || wc < 0.0;
        let has_pos = wa > 0.0 || wb > 0.0 || wc > 0.0;
        if has_neg && has_pos {
            continue;
        }
        if !has_neg && !has_pos {
            // Triangle seen edge-on.
            continue;
        }
        if wa == 0.0 || wb == 0.0 || wc == 0.0 {
            return None;
        }
        let sum = wa + wb + wc;
        xs.push((wa * a.x + wb * b.x + wc * c.x) / sum);
    }
    Some(xs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::bounding_box;
    use crate::harness::scenes;
    use std::f64::consts::PI;

    #[test]
    fn unit_cube_fraction() {
        let cube = scenes::cube(1.0);
        let bounds = bounding_box(&cube).unwrap().padded(0.05);
        let grid = voxelize(&cube, 64, &bounds).unwrap();
        assert_eq!(grid.dims, [64, 64, 64]);
        let expected = (1.0f64 / 1.1).powi(3);
        assert!((grid.occupied_fraction() - expected).abs() < 0.02, "{}", grid.occupied_fraction());
    }

    #[test]
    fn mesh_outside_bounds_is_empty() {
        let cube = scenes::cube(1.0).map_vertices(|v| v + Vec3::new(10.0, 0.0, 0.0));
        let bounds = Aabb::new(Vec3::repeat(-1.0), Vec3::repeat(1.0));
        assert_eq!(voxelize(&cube, 16, &bounds).unwrap().occupied_count(), 0);
    }

    #[test]
    fn sphere_volume() {
        let sphere = scenes::icosphere(0.5, 5);
        let bounds = bounding_box(&sphere).unwrap().padded(0.05);
        let grid = voxelize(&sphere, 128, &bounds).unwrap();
        let analytic = 4.0 / 3.0 * PI * 0.125;
        let rel = (grid.occupied_volume() - analytic).abs() / analytic;
        assert!(rel < 0.02, "relative error {rel}");
    }

    #[test]
    fn non_finite_bounds_rejected() {
        let bounds = Aabb::new(Vec3::new(f64::NAN, 0.0, 0.0), Vec3::repeat(1.0));
        assert!(matches!(voxelize(&scenes::cube(1.0), 8, &bounds), Err(GeometryError::InvalidBounds)));
    }

    #[test]
    fn grazing_rows_handled_on_symmetric_cube() {
        // Symmetric bounds put row centers exactly on the diagonals of the
        // cube's x-facing triangles.
        let cube = scenes::cube(1.0);
        let bounds = Aabb::new(Vec3::repeat(-0.75), Vec3::repeat(0.75));
        let grid = voxelize(&cube, 12, &bounds).unwrap();
        // Cells of size 0.125, cube covers centers in [-0.5, 0.5] -> 8 per axis.
        assert_eq!(grid.occupied_count(), 8 * 8 * 8);
    }

    #[test]
    fn convergence_in_resolution() {
        let sphere = scenes::icosphere(0.5, 5);
        let cube = scenes::cube(0.8).map_vertices(|v| v + Vec3::new(0.013, 0.007, -0.011));
        let cases = [(sphere, 4.0 / 3.0 * PI * 0.125 * analytic_icosphere_ratio(5)), (cube, 0.512)];
        for (mesh, volume) in cases {
            let bounds = bounding_box(&mesh).unwrap().padded(0.1);
            let err = |r: usize| (voxelize(&mesh, r, &bounds).unwrap().occupied_volume() - volume).abs() / volume;
            for r in [16, 32, 64] {
                assert!(err(2 * r) <= err(r) + 0.005, "r={r}: {} vs {}", err(2 * r), err(r));
            }
        }
    }

    // Enclosed volume of the tessellated sphere relative to the true sphere.
    fn analytic_icosphere_ratio(level: u32) -> f64 {
        let s = scenes::icosphere(0.5, level);
        s.signed_volume() / (4.0 / 3.0 * PI * 0.125)
    }
}
