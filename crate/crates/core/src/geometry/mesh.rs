use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Aabb, GeometryError, Vec3};

/// Linear RGB triple with components in `[0, 1]`.
pub type Rgb = [f64; 3];

/// Indexed triangle surface with optional per-vertex colors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
    pub vertex_colors: Option<Vec<Rgb>>,
}

impl TriangleMesh {
    /// Builds a mesh and checks every structural invariant.
    pub fn new(
        vertices: Vec<Vec3>,
        faces: Vec<[usize; 3]>,
        vertex_colors: Option<Vec<Rgb>>,
    ) -> Result<Self, GeometryError> {
        let mesh = Self { vertices, faces, vertex_colors };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let n = self.vertices.len();
        for (i, v) in self.vertices.iter().enumerate() {
            if !v.iter().all(|c| c.is_finite()) {
                return Err(GeometryError::NonFiniteVertex { vertex: i });
            }
        }
        for (fi, f) in self.faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&i| i >= n) {
                return Err(GeometryError::FaceIndexOutOfRange { face: fi, index: bad, vertex_count: n });
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(GeometryError::DegenerateFace { face: fi });
            }
        }
        if let Some(colors) = &self.vertex_colors {
            if colors.len() != n {
                return Err(GeometryError::ColorCountMismatch { colors: colors.len(), vertices: n });
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.triangle(face);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// Color of vertex `i`, falling back to `default` for uncolored meshes.
    pub fn color(&self, i: usize, default: Rgb) -> Rgb {
        self.vertex_colors.as_ref().map_or(default, |c| c[i])
    }

    /// Signed enclosed volume (positive for outward-facing winding).
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|&[a, b, c]| self.vertices[a].dot(&self.vertices[b].cross(&self.vertices[c])))
            .sum::<f64>()
            / 6.0
    }

    /// Applies `f` to every vertex position.
    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(f).collect(),
            faces: self.faces.clone(),
            vertex_colors: self.vertex_colors.clone(),
        }
    }

    /// Concatenates meshes, re-indexing faces. Colors are kept only when
    /// every part is colored.
    pub fn merge(parts: &[TriangleMesh]) -> TriangleMesh {
        let mut out = TriangleMesh::default();
        let all_colored = parts.iter().all(|p| p.vertex_colors.is_some());
        let mut colors = Vec::new();
        for p in parts {
            let base = out.vertices.len();
            out.vertices.extend_from_slice(&p.vertices);
            out.faces.extend(p.faces.iter().map(|f| f.map(|i| i + base)));
            if let Some(c) = &p.vertex_colors {
                colors.extend_from_slice(c);
            }
        }
        if all_colored && !parts.is_empty() {
            out.vertex_colors = Some(colors);
        }
        out
    }
}

/// Unordered point set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn bounding_box(mesh: &TriangleMesh) -> Result<Aabb, GeometryError> {
    Aabb::from_points(&mesh.vertices).ok_or(GeometryError::EmptyMesh)
}

/// Similarity transform `v' = (v + offset) * scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizeTransform {
    pub scale: f64,
    pub offset: Vec3,
}

impl NormalizeTransform {
    pub fn apply(&self, v: &Vec3) -> Vec3 {
        (v + self.offset) * self.scale
    }

    pub fn invert(&self, v: &Vec3) -> Vec3 {
        v / self.scale - self.offset
    }

    pub fn apply_mesh(&self, mesh: &TriangleMesh) -> TriangleMesh {
        mesh.map_vertices(|v| self.apply(v))
    }
}

/// Recenters the mesh's bounding box at the origin and scales its diagonal
/// to 1. The returned transform maps input coordinates to output coordinates.
pub fn normalize_to_unit(mesh: &TriangleMesh) -> Result<(TriangleMesh, NormalizeTransform), GeometryError> {
    let bb = bounding_box(mesh)?;
    let diag = bb.diagonal();
    if !(diag > 0.0) || !diag.is_finite() {
        return Err(GeometryError::ZeroDiagonal);
    }
    let transform = NormalizeTransform { scale: 1.0 / diag, offset: -bb.center() };
    Ok((transform.apply_mesh(mesh), transform))
}

/// Draws `n` points uniformly over the surface area of `mesh`.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<PointCloud, GeometryError> {
    if mesh.faces.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    if n == 0 {
        return Err(GeometryError::InvalidArgument("sample count must be at least 1".into()));
    }
    let mut cumulative = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for f in 0..mesh.faces.len() {
        total += mesh.face_area(f);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(GeometryError::InvalidArgument("mesh has zero surface area".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            let pick = rng.random::<f64>() * total;
            let face = cumulative.partition_point(|&c| c <= pick).min(cumulative.len() - 1);
            let [a, b, c] = mesh.triangle(face);
            let su = rng.random::<f64>().sqrt();
            let r = rng.random::<f64>();
            a * (1.0 - su) + b * (su * (1.0 - r)) + c * (su * r)
        })
        .collect();
    Ok(PointCloud::new(points))
}
