use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tracks::observe;
use crate::camera::Camera;
use crate::geometry::{Rgb, TriangleMesh};
use crate::render::{Bvh, DEFAULT_GRAY};
use crate::segment::MaskedView;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColorizeReport {
    pub uncolored_vertices: usize,
    pub uncolored_fraction: f64,
}

/// Per-vertex color: mean of the cropped RGB over every view in which the
/// vertex is unoccluded by the mesh itself (within `tolerance`) and lands on
/// the padded silhouette. Vertices seen nowhere get mid-gray.
pub fn colorize(mesh: &TriangleMesh, views: &[(&MaskedView, &Camera)], tolerance: f64) -> (TriangleMesh, ColorizeReport) {
    let bvh = Bvh::new(mesh);
    let colors: Vec<Option<Rgb>> = mesh
        .vertices
        .par_iter()
        .map(|p| {
            let mut sum = [0.0; 3];
            let mut n = 0usize;
            for (view, cam) in views {
                if let Some((u, v)) = observe(&bvh, &view.padded_mask, cam, p, tolerance) {
                    let px = view.rgb_masked.pixel(u.floor() as usize, v.floor() as usize);
                    for c in 0..3 {
                        sum[c] += px[c];
                    }
                    n += 1;
                }
            }
            (n > 0).then(|| sum.map(|s| s / n as f64))
        })
        .collect();
    let uncolored = colors.iter().filter(|c| c.is_none()).count();
    let mut out = mesh.clone();
    out.vertex_colors = Some(colors.into_iter().map(|c| c.unwrap_or(DEFAULT_GRAY)).collect());
    let report = ColorizeReport {
        uncolored_vertices: uncolored,
        uncolored_fraction: if mesh.vertices.is_empty() { 0.0 } else { uncolored as f64 / mesh.vertices.len() as f64 },
    };
    (out, report)
}
