use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::geometry::{bounding_box, normalize_to_unit, sample_surface, voxelize, Aabb, PointCloud, SpatialIndex, TriangleMesh, VoxelGrid};

// Fixed chunking keeps the floating-point summation order independent of
// the worker count.
const CHUNK: usize = 4096;

fn mean_sq_nn(from: &PointCloud, into: &SpatialIndex) -> f64 {
    let partials: Vec<f64> = from
        .points
        .par_chunks(CHUNK)
        .map(|chunk| chunk.iter().map(|p| into.nearest(p).expect("non-empty index").1).sum::<f64>())
        .collect();
    partials.iter().sum::<f64>() / from.len() as f64
}

/// Mean squared nearest-neighbour distance from P to Q plus from Q to P.
pub fn chamfer_distance(p: &PointCloud, q: &PointCloud) -> Result<f64, MetricsError> {
    if p.is_empty() || q.is_empty() {
        return Err(MetricsError::EmptyCloud);
    }
    let (ip, iq) = rayon::join(|| SpatialIndex::new(p), || SpatialIndex::new(q));
    let (pq, qp) = rayon::join(|| mean_sq_nn(p, &iq), || mean_sq_nn(q, &ip));
    Ok(pq + qp)
}

/// |A ∩ B| / |A ∪ B| of two grids with the same layout.
pub fn iou_grids(a: &VoxelGrid, b: &VoxelGrid) -> Result<f64, MetricsError> {
    if !a.same_layout(b) {
        return Err(MetricsError::ShapeMismatch("voxel grids have different layouts".into()));
    }
    let union = a.union_count(b);
    if union == 0 {
        return Err(MetricsError::EmptyUnion);
    }
    Ok(a.intersection_count(b) as f64 / union as f64)
}

/// Voxelizes both meshes on one grid over `shared_bounds` and compares them.
pub fn volumetric_iou(a: &TriangleMesh, b: &TriangleMesh, resolution: usize, shared_bounds: &Aabb) -> Result<f64, MetricsError> {
    let (ga, gb) = rayon::join(|| voxelize(a, resolution, shared_bounds), || voxelize(b, resolution, shared_bounds));
    iou_grids(&ga?, &gb?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeomConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_pad")]
    pub bounds_padding: f64,
}

fn default_samples() -> usize {
    100_000
}
fn default_resolution() -> usize {
    128
}
fn default_pad() -> f64 {
    0.1
}

impl Default for GeomConfig {
    fn default() -> Self {
        Self { samples: default_samples(), resolution: default_resolution(), seed: 0, bounds_padding: default_pad() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeomMetrics {
    pub chamfer: f64,
    pub iou: f64,
    pub samples_per_mesh: usize,
    pub voxel_resolution: usize,
    /// Points are drawn from mesh surfaces, not taken from vertices.
    pub point_source: String,
    /// Expected chamfer between two independent samplings of the ground truth,
    /// 2A / (πn) for surface area A in the normalized frame.
    pub sampling_noise: f64,
}

/// Both meshes are mapped into the ground truth's unit frame, so scale and
/// placement errors of the reconstruction show up in the metrics.
pub fn evaluate_geometry(recon: &TriangleMesh, gt: &TriangleMesh, config: &GeomConfig) -> Result<GeomMetrics, MetricsError> {
    if config.samples == 0 || config.resolution < 2 {
        return Err(MetricsError::InvalidConfig("samples must be ≥ 1 and resolution ≥ 2".into()));
    }
    let (gt_n, transform) = normalize_to_unit(gt)?;
    let recon_n = transform.apply_mesh(recon);
    let p = sample_surface(&recon_n, config.samples, config.seed.wrapping_add(1))?;
    let q = sample_surface(&gt_n, config.samples, config.seed)?;
    let chamfer = chamfer_distance(&p, &q)?;
    let bounds = bounding_box(&gt_n)?.padded(config.bounds_padding);
    let iou = volumetric_iou(&recon_n, &gt_n, config.resolution, &bounds)?;
    let area: f64 = (0..gt_n.faces.len()).map(|f| gt_n.face_area(f)).sum();
    Ok(GeomMetrics {
        chamfer,
        iou,
        samples_per_mesh: config.samples,
        voxel_resolution: config.resolution,
        point_source: "surface".into(),
        sampling_noise: 2.0 * area / (std::f64::consts::PI * config.samples as f64),
    })
}
