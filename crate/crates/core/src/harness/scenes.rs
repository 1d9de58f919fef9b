//! Built-in ground-truth objects.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::geometry::{Rgb, TriangleMesh, Vec3};
use crate::reconstruct::{marching_cubes, ScalarField};

/// Axis-aligned cube of edge `side` centered at the origin, outward winding.
pub fn cube(side: f64) -> TriangleMesh {
    let h = side / 2.0;
    let vertices = (0..8)
        .map(|i| Vec3::new(if i & 1 == 0 { -h } else { h }, if i & 2 == 0 { -h } else { h }, if i & 4 == 0 { -h } else { h }))
        .collect();
    let faces = vec![
        [0, 2, 1], [1, 2, 3], // -z
        [4, 5, 6], [5, 7, 6], // +z
        [0, 1, 4], [1, 5, 4], // -y
        [2, 6, 3], [3, 6, 7], // +y
        [0, 4, 2], [2, 4, 6], // -x
        [1, 3, 5], [3, 7, 5], // +x
    ];
    TriangleMesh { vertices, faces, vertex_colors: None }
}

/// Latitude/longitude sphere with `stacks` bands and `slices` segments.
pub fn uv_sphere(radius: f64, stacks: usize, slices: usize) -> TriangleMesh {
    assert!(stacks >= 2 && slices >= 3);
    let mut vertices = vec![Vec3::new(0.0, 0.0, radius)];
    for s in 1..stacks {
        let theta = PI * s as f64 / stacks as f64;
        for k in 0..slices {
            let phi = 2.0 * PI * k as f64 / slices as f64;
            vertices.push(radius * Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()));
        }
    }
    vertices.push(Vec3::new(0.0, 0.0, -radius));
    let bottom = vertices.len() - 1;
    let ring = |s: usize, k: usize| 1 + (s - 1) * slices + k % slices;
    let mut faces = Vec::new();
    for k in 0..slices {
        faces.push([0, ring(1, k), ring(1, k + 1)]);
    }
    for s in 1..stacks - 1 {
        for k in 0..slices {
            let (a, b, c, d) = (ring(s, k), ring(s, k + 1), ring(s + 1, k), ring(s + 1, k + 1));
            faces.push([a, c, d]);
            faces.push([a, d, b]);
        }
    }
    for k in 0..slices {
        faces.push([bottom, ring(stacks - 1, k + 1), ring(stacks - 1, k)]);
    }
    TriangleMesh { vertices, faces, vertex_colors: None }
}

/// Subdivided icosahedron projected onto a sphere; 20·4^level faces.
pub fn icosphere(radius: f64, level: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, t, 0.0), (1.0, t, 0.0), (-1.0, -t, 0.0), (1.0, -t, 0.0),
        (0.0, -1.0, t), (0.0, 1.0, t), (0.0, -1.0, -t), (0.0, 1.0, -t),
        (t, 0.0, -1.0), (t, 0.0, 1.0), (-t, 0.0, -1.0), (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..level {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut m = [0; 3];
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                m[e] = *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    vertices.push(((vertices[a] + vertices[b]) / 2.0).normalize());
                    vertices.len() - 1
                });
            }
            next.extend([[f[0], m[0], m[2]], [f[1], m[1], m[0]], [f[2], m[2], m[1]], [m[0], m[1], m[2]]]);
        }
        faces = next;
    }
    for v in &mut vertices {
        *v *= radius;
    }
    TriangleMesh { vertices, faces, vertex_colors: None }
}

pub const FIGURINE_TOP: Rgb = [0.85, 0.45, 0.15];
pub const FIGURINE_BOTTOM: Rgb = [0.95, 0.9, 0.75];

fn sd_sphere(p: &Vec3, c: Vec3, r: f64) -> f64 {
    (p - c).norm() - r
}

fn sd_box(p: &Vec3, c: Vec3, half: Vec3) -> f64 {
    let q = (p - c).abs() - half;
    q.sup(&Vec3::zeros()).norm() + q.max().min(0.0)
}

// Ring lying in a horizontal plane.
fn sd_torus(p: &Vec3, c: Vec3, major: f64, minor: f64) -> f64 {
    let d = p - c;
    let q = (d.x * d.x + d.y * d.y).sqrt() - major;
    (q * q + d.z * d.z).sqrt() - minor
}

fn figurine_sdf(p: &Vec3) -> f64 {
    let body = sd_sphere(p, Vec3::new(0.0, 0.0, -0.05), 0.26);
    let head = sd_box(p, Vec3::new(0.3, 0.0, 0.17), Vec3::new(0.11, 0.1, 0.1));
    let tail = sd_torus(p, Vec3::new(-0.5, 0.0, -0.12), 0.25, 0.05);
    body.min(head).min(tail)
}

/// Asymmetric stand-in for a pet figurine: round body, box head and a tail
/// curled into a flat ring, colored two-tone by height.
pub fn figurine() -> TriangleMesh {
    let spacing = 0.0125;
    let origin = Vec3::new(-0.85, -0.35, -0.4);
    let dims = [121, 57, 57];
    let field = ScalarField::from_fn(origin, spacing, dims, |p| -figurine_sdf(p));
    let mut mesh = marching_cubes(&field, 0.0);
    mesh.vertex_colors = Some(mesh.vertices.iter().map(|v| if v.z > 0.0 { FIGURINE_TOP } else { FIGURINE_BOTTOM }).collect());
    mesh
}

/// Built-in mesh by name: `sphere`, `cube` or `figurine`.
pub fn builtin(name: &str) -> Option<TriangleMesh> {
    match name {
        "sphere" => Some(icosphere(0.5, 5)),
        "cube" => Some(cube(0.8)),
        "figurine" => Some(figurine()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::bounding_box;
    use crate::reconstruct::{euler_characteristic, is_watertight};

    #[test]
    fn primitives_are_closed_and_outward() {
        for m in [cube(1.0), uv_sphere(1.0, 8, 12), icosphere(1.0, 2)] {
            m.validate().unwrap();
            assert!(is_watertight(&m));
            assert_eq!(euler_characteristic(&m), 2);
            assert!(m.signed_volume() > 0.0);
        }
        assert!((cube(2.0).signed_volume() - 8.0).abs() < 1e-12);
        assert_eq!(icosphere(1.0, 3).faces.len(), 20 * 64);
    }

    #[test]
    fn figurine_shape() {
        let m = figurine();
        m.validate().unwrap();
        assert!(is_watertight(&m));
        // Sphere-like body and head plus one ring: genus 1.
        assert_eq!(euler_characteristic(&m), 0);
        assert!(m.signed_volume() > 0.0);
        let b = bounding_box(&m).unwrap();
        assert!(b.min.x < -0.75 && b.max.x > 0.4);
        let colors = m.vertex_colors.as_ref().unwrap();
        assert!(colors.contains(&FIGURINE_TOP) && colors.contains(&FIGURINE_BOTTOM));
        assert_eq!(m, figurine());
    }
}
