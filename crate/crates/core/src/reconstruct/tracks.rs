use rayon::prelude::*;
use serde::Serialize;

use crate::camera::Camera;
use crate::geometry::{sample_surface, PointCloud, TriangleMesh, Vec3};
use crate::render::{BinaryMask, Bvh};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Observation {
    pub camera_index: usize,
    pub u: f64,
    pub v: f64,
}

/// Surface points seen in several views, with their image observations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseTracks {
    pub points: PointCloud,
    pub observations: Vec<Vec<Observation>>,
}

#[derive(Serialize)]
struct TrackRecord<'a> {
    point: [f64; 3],
    observations: &'a [Observation],
}

impl SparseTracks {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_json(&self) -> String {
        let records: Vec<TrackRecord> = self
            .points
            .points
            .iter()
            .zip(&self.observations)
            .map(|(p, obs)| TrackRecord { point: [p.x, p.y, p.z], observations: obs })
            .collect();
        serde_json::to_string(&serde_json::json!({ "tracks": records })).expect("tracks serialize")
    }
}

/// Point `p` as seen by `camera`: in frame, unoccluded by `bvh`, and on a
/// set mask pixel. Returns the image coordinates.
pub(crate) fn observe(bvh: &Bvh, mask: &BinaryMask, camera: &Camera, p: &Vec3, tolerance: f64) -> Option<(f64, f64)> {
    let proj = camera.project(p);
    let (x, y) = proj.pixel(&camera.intrinsics)?;
    if !mask.get(x, y) {
        return None;
    }
    let center = camera.center();
    let to_p = p - center;
    let dist = to_p.norm();
    let dir = to_p / dist;
    if let Some(hit) = bvh.intersect(&center, &dir, 0.0, dist - tolerance) {
        if hit.t < dist - tolerance {
            return None;
        }
    }
    match proj {
        crate::camera::Projection::Visible { u, v, .. } => Some((u, v)),
        crate::camera::Projection::BehindCamera => None,
    }
}

/// Samples `n_candidates` surface points and keeps those observed in at
/// least `min_views` views.
pub fn sample_tracks(
    mesh: &TriangleMesh,
    views: &[(&BinaryMask, &Camera)],
    n_candidates: usize,
    min_views: usize,
    seed: u64,
) -> SparseTracks {
    if mesh.faces.is_empty() || n_candidates == 0 || views.len() < min_views.max(1) {
        return SparseTracks::default();
    }
    let Ok(candidates) = sample_surface(mesh, n_candidates, seed) else {
        return SparseTracks::default();
    };
    let bvh = Bvh::new(mesh);
    let kept: Vec<Option<(Vec3, Vec<Observation>)>> = candidates
        .points
        .par_iter()
        .map(|p| {
            let obs: Vec<Observation> = views
                .iter()
                .enumerate()
                .filter_map(|(ci, (mask, cam))| {
                    let tol = 1e-6 * (p - cam.center()).norm();
                    observe(&bvh, mask, cam, p, tol).map(|(u, v)| Observation { camera_index: ci, u, v })
                })
                .collect();
            (obs.len() >= min_views).then_some((*p, obs))
        })
        .collect();
    let mut tracks = SparseTracks::default();
    for (p, obs) in kept.into_iter().flatten() {
        tracks.points.points.push(p);
        tracks.observations.push(obs);
    }
    tracks
}
