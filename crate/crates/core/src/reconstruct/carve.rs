use bitvec::prelude::*;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ReconstructError;
use crate::camera::{Camera, Projection};
use crate::geometry::{Aabb, Vec3, VoxelGrid};
use crate::render::BinaryMask;

#[derive(Clone, Debug, PartialEq)]
pub struct CarveResult {
    pub grid: VoxelGrid,
    pub views_used: usize,
    pub carved_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarveStats {
    pub resolution: usize,
    pub dims: [usize; 3],
    pub cell_size: f64,
    pub views_used: usize,
    pub carved_fraction: f64,
    pub occupied_voxels: usize,
}

impl CarveResult {
    pub fn stats(&self, resolution: usize) -> CarveStats {
        CarveStats {
            resolution,
            dims: self.grid.dims,
            cell_size: self.grid.cell_size,
            views_used: self.views_used,
            carved_fraction: self.carved_fraction,
            occupied_voxels: self.grid.occupied_count(),
        }
    }
}

/// Does `view` keep the point? Points outside the view frustum are kept.
#[inline]
pub(crate) fn survives(mask: &BinaryMask, camera: &Camera, p: &Vec3) -> bool {
    match camera.project(p) {
        Projection::BehindCamera => true,
        proj => match proj.pixel(&camera.intrinsics) {
            Some((x, y)) => mask.get(x, y),
            None => true,
        },
    }
}

/// Visual hull by voxel carving: starting from a full grid over `bounds`,
/// a voxel survives iff its center projects onto a set mask pixel in every
/// view whose frustum contains it.
pub fn carve(views: &[(&BinaryMask, &Camera)], bounds: &Aabb, resolution: usize) -> Result<CarveResult, ReconstructError> {
    if views.is_empty() {
        return Err(ReconstructError::NoViews);
    }
    if resolution < 8 {
        return Err(ReconstructError::InvalidArgument("carve resolution must be at least 8".into()));
    }
    for (i, (mask, cam)) in views.iter().enumerate() {
        if mask.width != cam.intrinsics.width || mask.height != cam.intrinsics.height {
            return Err(ReconstructError::InvalidArgument(format!("view {i}: mask size differs from camera image size")));
        }
    }
    let mut grid = VoxelGrid::for_bounds(bounds, resolution)?;
    if bounds.extent().min() <= 0.0 {
        return Err(ReconstructError::InvalidArgument("carve bounds are degenerate".into()));
    }
    let [nx, ny, nz] = grid.dims;
    let layout = grid.clone();
    let slabs: Vec<Vec<bool>> = (0..nz)
        .into_par_iter()
        .map(|k| {
            let mut slab = vec![false; nx * ny];
            for j in 0..ny {
                for i in 0..nx {
                    let c = layout.center(i, j, k);
                    slab[i + nx * j] = views.iter().all(|(m, cam)| survives(m, cam, &c));
                }
            }
            slab
        })
        .collect();
    let mut bits = BitVec::with_capacity(nx * ny * nz);
    for slab in slabs {
        bits.extend(slab);
    }
    grid.occupancy = bits;
    let carved_fraction = 1.0 - grid.occupied_fraction();
    Ok(CarveResult { grid, views_used: views.len(), carved_fraction })
}

/// Fallback carve bounds when no ground truth is known: the intersection of
/// per-view boxes, each spanning the mask's pixel bounding rectangle
/// back-projected between depths `near` and `far`.
pub fn bounds_from_silhouettes(views: &[(&BinaryMask, &Camera)], near: f64, far: f64) -> Option<Aabb> {
    let mut acc: Option<Aabb> = None;
    for (mask, cam) in views {
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for y in 0..mask.height {
            for x in 0..mask.width {
                if mask.get(x, y) {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x + 1);
                    y1 = y1.max(y + 1);
                }
            }
        }
        if x0 == usize::MAX {
            return None;
        }
        let mut pts = Vec::with_capacity(8);
        for d in [near, far] {
            for (u, v) in [(x0, y0), (x1, y0), (x0, y1), (x1, y1)] {
                pts.push(cam.unproject(u as f64, v as f64, d));
            }
        }
        let b = Aabb::from_points(&pts)?;
        acc = match acc {
            None => Some(b),
            Some(a) => Some(a.intersection(&b)?),
        };
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{generate_rig, pose_to_camera, Intrinsics, RigSpec, SphericalPose};
    use crate::geometry::{bounding_box, voxelize};
    use crate::harness::scenes;
    use crate::render::{render_rig, Scene};

    #[test]
    fn empty_mask_carves_everything() {
        let cam = pose_to_camera(&SphericalPose::new(60.0, 0.0, 2.5, Vec3::zeros()).unwrap(), &Intrinsics::default()).unwrap();
        let mask = BinaryMask::new(256, 256);
        let bounds = Aabb::new(Vec3::repeat(-0.3), Vec3::repeat(0.3));
        let r = carve(&[(&mask, &cam)], &bounds, 16).unwrap();
        assert_eq!(r.grid.occupied_count(), 0);
        assert_eq!(r.carved_fraction, 1.0);
    }

    #[test]
    fn errors() {
        let bounds = Aabb::new(Vec3::repeat(-0.3), Vec3::repeat(0.3));
        assert!(matches!(carve(&[], &bounds, 16), Err(ReconstructError::NoViews)));
        let cam = pose_to_camera(&SphericalPose::new(60.0, 0.0, 2.5, Vec3::zeros()).unwrap(), &Intrinsics::default()).unwrap();
        let mask = BinaryMask::new(256, 256);
        let flat = Aabb::new(Vec3::zeros(), Vec3::new(1.0, 1.0, 0.0));
        assert!(carve(&[(&mask, &cam)], &flat, 16).is_err());
    }

    #[test]
    fn sphere_hull_is_superset() {
        let sphere = scenes::icosphere(0.5, 4);
        let scene = Scene::single("ball", sphere.clone());
        let cams: Vec<_> = generate_rig(&RigSpec::ring(45.0, 10.0, 36)).unwrap().into_iter().map(|r| r.camera).collect();
        let renders = render_rig(&scene, &cams).unwrap();
        let views: Vec<_> = renders.iter().zip(&cams).map(|(r, c)| (&r.masks["ball"], c)).collect();
        let bounds = bounding_box(&sphere).unwrap().padded(0.1);
        let hull = carve(&views, &bounds, 64).unwrap();
        let gt = voxelize(&sphere, 64, &bounds).unwrap();
        assert!(hull.grid.occupied_volume() >= 4.0 / 3.0 * std::f64::consts::PI * 0.125 * 0.97);
        // Interior voxels well away from the silhouette boundary all survive.
        let shrunk = voxelize(&scenes::icosphere(0.45, 4), 64, &bounds).unwrap();
        assert!(shrunk.is_subset_of(&hull.grid));
        assert!(gt.occupied_count() <= hull.grid.occupied_count());
    }

    #[test]
    fn fallback_bounds_contain_object() {
        let sphere = scenes::icosphere(0.4, 3);
        let scene = Scene::single("ball", sphere);
        let cams: Vec<_> = generate_rig(&RigSpec::ring(60.0, 45.0, 8)).unwrap().into_iter().map(|r| r.camera).collect();
        let renders = render_rig(&scene, &cams).unwrap();
        let views: Vec<_> = renders.iter().zip(&cams).map(|(r, c)| (&r.masks["ball"], c)).collect();
        let b = bounds_from_silhouettes(&views, 0.5, 5.0).unwrap();
        assert!(b.contains(&Vec3::repeat(0.39)) || b.contains(&Vec3::new(0.39, 0.0, 0.0)));
        assert!(b.contains(&Vec3::new(0.0, 0.0, -0.39)));
        // Sideways the silhouettes pin the box down; along the depth range
        // it is only limited by near/far, yet still inside the rig.
        let e = b.extent();
        assert!(e.x < 2.0 && e.y < 2.0, "{e:?}");
        assert!(e.z < 2.0 * 2.5, "{e:?}");
    }
}
