//! Deterministic ray-cast renderer: RGB, normalized depth and per-object
//! silhouette masks for every camera.

pub mod bvh;
mod image;

pub use bvh::{Bvh, Hit};
pub use image::{BinaryMask, ImageBuffer};

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::camera::Camera;
use crate::geometry::{bounding_box, Aabb, Rgb, TriangleMesh, Vec3};

/// Surface color used for meshes without vertex colors.
pub const DEFAULT_GRAY: Rgb = [0.7, 0.7, 0.7];
pub const AMBIENT: f64 = 0.2;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("scene has no renderable object")]
    EmptyScene,
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("camera {index}: {source}")]
    Camera {
        index: usize,
        #[source]
        source: Box<RenderError>,
    },
    #[error("image error: {0}")]
    Image(String),
    #[error("I/O error on {0}: {1}")]
    Io(String, #[source] std::io::Error),
}

#[derive(Clone, Debug)]
pub struct SceneObject {
    pub name: String,
    pub mesh: TriangleMesh,
}

#[derive(Clone, Debug)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
    pub background: Rgb,
}

impl Scene {
    pub fn new(objects: Vec<SceneObject>, background: Rgb) -> Result<Self, RenderError> {
        let mut names = std::collections::BTreeSet::new();
        for o in &objects {
            if o.name.trim().is_empty() {
                return Err(RenderError::InvalidScene("object names must be non-empty".into()));
            }
            if !names.insert(o.name.as_str()) {
                return Err(RenderError::InvalidScene(format!("duplicate object name '{}'", o.name)));
            }
        }
        Ok(Self { objects, background })
    }

    pub fn single(name: &str, mesh: TriangleMesh) -> Self {
        Self { objects: vec![SceneObject { name: name.to_string(), mesh }], background: [0.0; 3] }
    }

    pub fn object(&self, name: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.name == name)
    }

    pub fn bounds(&self) -> Option<Aabb> {
        let boxes: Vec<Aabb> = self.objects.iter().filter_map(|o| bounding_box(&o.mesh).ok()).collect();
        let corners: Vec<Vec3> = boxes.iter().flat_map(|b| [b.min, b.max]).collect();
        Aabb::from_points(&corners)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderOutput {
    pub rgb: ImageBuffer,
    /// Optical-axis depth divided by `depth_scale`; 0 where nothing was hit.
    pub depth: ImageBuffer,
    pub depth_scale: f64,
    pub masks: BTreeMap<String, BinaryMask>,
}

/// Scene with acceleration structures built once for many cameras.
pub struct PreparedScene<'a> {
    scene: &'a Scene,
    bvhs: Vec<Bvh>,
    bounds: Aabb,
}

impl<'a> PreparedScene<'a> {
    pub fn new(scene: &'a Scene) -> Result<Self, RenderError> {
        if scene.objects.is_empty() || scene.objects.iter().all(|o| o.mesh.faces.is_empty()) {
            return Err(RenderError::EmptyScene);
        }
        let bounds = scene.bounds().ok_or(RenderError::EmptyScene)?;
        Ok(Self { scene, bvhs: scene.objects.iter().map(|o| Bvh::new(&o.mesh)).collect(), bounds })
    }

    /// First hit along a ray as `(object index, hit)`; ties go to the lower object.
    pub fn trace(&self, origin: &Vec3, dir: &Vec3) -> Option<(usize, Hit)> {
        let mut best: Option<(usize, Hit)> = None;
        for (oi, bvh) in self.bvhs.iter().enumerate() {
            let limit = best.map_or(f64::INFINITY, |(_, h)| h.t);
            if let Some(h) = bvh.intersect(origin, dir, 0.0, limit) {
                if best.is_none_or(|(_, b)| h.t < b.t) {
                    best = Some((oi, h));
                }
            }
        }
        best
    }

    pub fn render(&self, camera: &Camera) -> RenderOutput {
        let k = camera.intrinsics;
        let (w, h) = (k.width, k.height);
        let forward = camera.forward();
        let center = camera.center();
        let depth_scale = corners(&self.bounds)
            .iter()
            .map(|c| (c - center).norm())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);

        type Px = ([f64; 3], f64, Option<usize>);
        let rows: Vec<Vec<Px>> = (0..h)
            .into_par_iter()
            .map(|y| {
                (0..w)
                    .map(|x| {
                        let (o, d) = camera.ray(x as f64 + 0.5, y as f64 + 0.5);
                        match self.trace(&o, &d) {
                            None => (self.scene.background, 0.0, None),
                            Some((oi, hit)) => {
                                let color = self.shade(oi, &hit, &forward);
                                let depth = hit.t * d.dot(&forward);
                                (color, (depth / depth_scale).clamp(f64::MIN_POSITIVE, 1.0), Some(oi))
                            }
                        }
                    })
                    .collect()
            })
            .collect();

        let mut rgb = ImageBuffer::new(w, h, 3);
        let mut depth = ImageBuffer::new(w, h, 1);
        let mut masks: Vec<BinaryMask> = self.scene.objects.iter().map(|_| BinaryMask::new(w, h)).collect();
        for (y, row) in rows.into_iter().enumerate() {
            for (x, (color, d, obj)) in row.into_iter().enumerate() {
                rgb.pixel_mut(x, y).copy_from_slice(&color);
                depth.pixel_mut(x, y)[0] = d;
                if let Some(oi) = obj {
                    masks[oi].set(x, y, true);
                }
            }
        }
        let masks = self.scene.objects.iter().map(|o| o.name.clone()).zip(masks).collect();
        RenderOutput { rgb, depth, depth_scale, masks }
    }

    fn shade(&self, object: usize, hit: &Hit, forward: &Vec3) -> Rgb {
        let mesh = &self.scene.objects[object].mesh;
        let [a, b, c] = mesh.faces[hit.face];
        let tri = mesh.triangle(hit.face);
        let normal = (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).normalize();
        let w0 = 1.0 - hit.u - hit.v;
        let (ca, cb, cc) = (mesh.color(a, DEFAULT_GRAY), mesh.color(b, DEFAULT_GRAY), mesh.color(c, DEFAULT_GRAY));
        let intensity = AMBIENT + (1.0 - AMBIENT) * normal.dot(forward).abs();
        [0, 1, 2].map(|i| ((w0 * ca[i] + hit.u * cb[i] + hit.v * cc[i]) * intensity).clamp(0.0, 1.0))
    }
}

fn corners(b: &Aabb) -> [Vec3; 8] {
    let mut out = [Vec3::zeros(); 8];
    for (i, c) in out.iter_mut().enumerate() {
        *c = Vec3::new(
            if i & 1 == 0 { b.min.x } else { b.max.x },
            if i & 2 == 0 { b.min.y } else { b.max.y },
            if i & 4 == 0 { b.min.z } else { b.max.z },
        );
    }
    out
}

/// Renders one view: one ray per pixel center, nearest hit wins, Lambertian
/// shading with the light along the optical axis plus ambient.
pub fn render(scene: &Scene, camera: &Camera) -> Result<RenderOutput, RenderError> {
    Ok(PreparedScene::new(scene)?.render(camera))
}

pub fn render_rig(scene: &Scene, cameras: &[Camera]) -> Result<Vec<RenderOutput>, RenderError> {
    let prepared = PreparedScene::new(scene).map_err(|e| RenderError::Camera { index: 0, source: Box::new(e) })?;
    Ok(cameras.iter().map(|c| prepared.render(c)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{generate_rig, pose_to_camera, Intrinsics, Projection, RigSpec, SphericalPose};
    use crate::geometry::sample_surface;
    use crate::harness::scenes;

    fn camera(theta: f64, phi: f64, radius: f64) -> Camera {
        pose_to_camera(&SphericalPose::new(theta, phi, radius, Vec3::zeros()).unwrap(), &Intrinsics::default()).unwrap()
    }

    #[test]
    fn object_behind_camera_renders_empty() {
        let sphere = scenes::icosphere(0.3, 3).map_vertices(|v| v + Vec3::new(5.0, 0.0, 0.0));
        let scene = Scene::single("ball", sphere);
        let out = render(&scene, &camera(90.0, 0.0, 2.0)).unwrap();
        assert!(out.masks["ball"].is_empty());
        assert!(out.depth.data.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn sphere_disc_area_matches_projection() {
        let r = 0.5;
        let dist = 2.5;
        let scene = Scene::single("ball", scenes::icosphere(r, 5));
        let out = render(&scene, &camera(60.0, 30.0, dist)).unwrap();
        // Silhouette of a sphere seen head-on is a disc of angular radius asin(r/d).
        let half_angle = (r / dist).asin();
        let disc_radius_px = 290.0 * half_angle.tan();
        let expected = std::f64::consts::PI * disc_radius_px.powi(2) / (256.0 * 256.0);
        let observed = out.masks["ball"].count() as f64 / (256.0 * 256.0);
        assert!((observed - expected).abs() / expected < 0.03, "{observed} vs {expected}");
    }

    #[test]
    fn empty_scene_is_error() {
        let scene = Scene::new(vec![], [0.0; 3]).unwrap();
        assert!(matches!(render(&scene, &camera(45.0, 0.0, 2.0)), Err(RenderError::EmptyScene)));
    }

    #[test]
    fn occlusion_gives_disjoint_masks() {
        let near = scenes::icosphere(0.3, 4).map_vertices(|v| v + Vec3::new(0.6, 0.0, 0.0));
        let far = scenes::icosphere(0.4, 4).map_vertices(|v| v + Vec3::new(-0.6, 0.0, 0.12));
        let scene = Scene::new(
            vec![SceneObject { name: "near".into(), mesh: near.clone() }, SceneObject { name: "far".into(), mesh: far }],
            [0.0; 3],
        )
        .unwrap();
        let cam = camera(90.0, 0.0, 3.0);
        let both = render(&scene, &cam).unwrap();
        let alone = render(&Scene::single("near", near), &cam).unwrap();
        assert_eq!(both.masks["near"], alone.masks["near"]);
        let (n, f) = (&both.masks["near"], &both.masks["far"]);
        assert!(n.bits.iter().zip(&f.bits).all(|(a, b)| !(a & b)));
        assert!(f.count() > 0);
    }

    #[test]
    fn rendering_is_deterministic() {
        let scene = Scene::single("cat", scenes::figurine());
        let cams: Vec<Camera> = generate_rig(&RigSpec::ring(45.0, 90.0, 4)).unwrap().into_iter().map(|r| r.camera).collect();
        assert_eq!(render_rig(&scene, &cams).unwrap(), render_rig(&scene, &cams).unwrap());
    }

    #[test]
    fn asymmetric_figurine_silhouettes_differ() {
        let scene = Scene::single("cat", scenes::figurine());
        let cams: Vec<Camera> = generate_rig(&RigSpec::ring(45.0, 10.0, 36)).unwrap().into_iter().map(|r| r.camera).collect();
        let outs = render_rig(&scene, &cams).unwrap();
        assert_eq!(outs.len(), 36);
        for i in 0..outs.len() {
            for j in i + 1..outs.len() {
                assert_ne!(outs[i].masks["cat"], outs[j].masks["cat"], "views {i} and {j}");
            }
        }
    }

    #[test]
    fn visible_surface_points_land_in_mask() {
        let mesh = scenes::figurine();
        let scene = Scene::single("cat", mesh.clone());
        let prepared = PreparedScene::new(&scene).unwrap();
        let samples = sample_surface(&mesh, 500, 3).unwrap();
        for rc in generate_rig(&RigSpec::ring(45.0, 60.0, 6)).unwrap() {
            let cam = rc.camera;
            let out = prepared.render(&cam);
            let mut checked = 0;
            for p in &samples.points {
                let Some((px, py)) = cam.project(p).pixel(&cam.intrinsics) else { continue };
                let to_p = p - cam.center();
                let dist = to_p.norm();
                let hit = prepared.trace(&cam.center(), &(to_p / dist));
                if hit.is_some_and(|(_, h)| h.t < dist - 1e-6) {
                    continue;
                }
                checked += 1;
                assert!(out.masks["cat"].get(px, py) || neighbor_set(&out.masks["cat"], px, py));
            }
            assert!(checked > 50);
            // Depth ordering: nearest object owns every set pixel.
            assert!(matches!(cam.project(&Vec3::zeros()), Projection::Visible { .. }));
        }
    }

    // A visible sample can sit exactly on a pixel boundary of the silhouette.
    fn neighbor_set(m: &BinaryMask, x: usize, y: usize) -> bool {
        let xs = x.saturating_sub(1)..=(x + 1).min(m.width - 1);
        xs.clone().any(|xx| (y.saturating_sub(1)..=(y + 1).min(m.height - 1)).any(|yy| m.get(xx, yy)))
    }
}
