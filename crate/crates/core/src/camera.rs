//! Pinhole cameras placed on a spherical rig.
//!
//! World frame is right-handed with +z up; a pose at polar angle θ and
//! azimuth φ sits at `target + r (sinθ cosφ, sinθ sinφ, cosθ)`. Camera frame
//! is +x right, +y down (image rows grow downward), +z forward.

use std::fs;
use std::path::Path;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;

#[derive(Debug, Error)]
pub enum CameraError {
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid rig: {0}")]
    InvalidRig(String),
    #[error("camera file {path}: {message}")]
    File { path: String, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphericalPose {
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub radius: f64,
    pub target: Vec3,
}

impl SphericalPose {
    /// Validates the pose and wraps `phi_deg` into `[0, 360)`.
    pub fn new(theta_deg: f64, phi_deg: f64, radius: f64, target: Vec3) -> Result<Self, CameraError> {
        if !(theta_deg > 0.0 && theta_deg < 180.0) {
            return Err(CameraError::InvalidPose(format!("theta {theta_deg} outside (0, 180)")));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(CameraError::InvalidPose(format!("radius {radius} must be positive")));
        }
        if !phi_deg.is_finite() || !target.iter().all(|v| v.is_finite()) {
            return Err(CameraError::InvalidPose("non-finite azimuth or target".into()));
        }
        let mut phi = phi_deg.rem_euclid(360.0);
        if phi >= 360.0 {
            phi = 0.0;
        }
        Ok(Self { theta_deg, phi_deg: phi, radius, target })
    }

    pub fn center(&self) -> Vec3 {
        let (t, p) = (self.theta_deg.to_radians(), self.phi_deg.to_radians());
        self.target + self.radius * Vec3::new(t.sin() * p.cos(), t.sin() * p.sin(), t.cos())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for Intrinsics {
    /// 256×256, f = 290 px, principal point at the image center.
    fn default() -> Self {
        Self { fx: 290.0, fy: 290.0, cx: 128.0, cy: 128.0, width: 256, height: 256 }
    }
}

impl Intrinsics {
    pub fn validate(&self) -> Result<(), CameraError> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(CameraError::InvalidIntrinsics("focal lengths must be positive".into()));
        }
        if self.width < 16 || self.height < 16 {
            return Err(CameraError::InvalidIntrinsics("image must be at least 16x16".into()));
        }
        if !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(CameraError::InvalidIntrinsics("principal point must be finite".into()));
        }
        Ok(())
    }
}

/// Result of projecting a point into an image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Projection {
    Visible { u: f64, v: f64, depth: f64 },
    BehindCamera,
}

impl Projection {
    /// Integer pixel containing the projection, if it lands in the image.
    pub fn pixel(&self, intrinsics: &Intrinsics) -> Option<(usize, usize)> {
        match *self {
            Projection::Visible { u, v, .. } => {
                let (px, py) = (u.floor(), v.floor());
                (px >= 0.0 && py >= 0.0 && px < intrinsics.width as f64 && py < intrinsics.height as f64)
                    .then_some((px as usize, py as usize))
            }
            Projection::BehindCamera => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Camera {
    pub intrinsics: Intrinsics,
    /// World-to-camera rotation; rows are the camera right, down and forward axes.
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl Camera {
    pub fn new(intrinsics: Intrinsics, rotation: Matrix3<f64>, translation: Vec3) -> Result<Self, CameraError> {
        intrinsics.validate()?;
        let residual = (rotation * rotation.transpose() - Matrix3::identity()).amax();
        if !(residual < 1e-9) || !((rotation.determinant() - 1.0).abs() < 1e-9) {
            return Err(CameraError::InvalidPose("rotation is not a proper orthonormal matrix".into()));
        }
        Ok(Self { intrinsics, rotation, translation })
    }

    pub fn center(&self) -> Vec3 {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn forward(&self) -> Vec3 {
        self.rotation.row(2).transpose()
    }

    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn project(&self, p: &Vec3) -> Projection {
        let pc = self.to_camera(p);
        if !(pc.z > 0.0) {
            return Projection::BehindCamera;
        }
        let k = &self.intrinsics;
        Projection::Visible { u: k.fx * pc.x / pc.z + k.cx, v: k.fy * pc.y / pc.z + k.cy, depth: pc.z }
    }

    /// World-space ray `(origin, unit direction)` through image point `(u, v)`.
    pub fn ray(&self, u: f64, v: f64) -> (Vec3, Vec3) {
        let k = &self.intrinsics;
        let dir_cam = Vec3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
        (self.center(), (self.rotation.transpose() * dir_cam).normalize())
    }

    /// Point at `depth` (along the optical axis) behind image point `(u, v)`.
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Vec3 {
        let k = &self.intrinsics;
        let pc = Vec3::new((u - k.cx) / k.fx * depth, (v - k.cy) / k.fy * depth, depth);
        self.rotation.transpose() * (pc - self.translation)
    }
}

/// Look-at camera for a spherical pose. The up hint is +z except within 1°
/// of the poles, where +x is used.
pub fn pose_to_camera(pose: &SphericalPose, intrinsics: &Intrinsics) -> Result<Camera, CameraError> {
    let pose = SphericalPose::new(pose.theta_deg, pose.phi_deg, pose.radius, pose.target)?;
    intrinsics.validate()?;
    let center = pose.center();
    let forward = (pose.target - center).normalize();
    let up = if pose.theta_deg < 1.0 || pose.theta_deg > 179.0 { Vec3::x() } else { Vec3::z() };
    let right = forward.cross(&up).normalize();
    let down = forward.cross(&right);
    let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
    let translation = -(rotation * center);
    Camera::new(*intrinsics, rotation, translation)
}

/// Rings of cameras: for each polar angle, `count_per_ring` views at
/// `φ = phi_offset + k Δφ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigSpec {
    pub theta_deg: Vec<f64>,
    pub delta_phi_deg: f64,
    pub count_per_ring: usize,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "Vec3::zeros")]
    pub target: Vec3,
    #[serde(default)]
    pub intrinsics: Intrinsics,
    #[serde(default)]
    pub phi_offset_deg: f64,
}

fn default_radius() -> f64 {
    2.5
}

impl RigSpec {
    pub fn ring(theta_deg: f64, delta_phi_deg: f64, count_per_ring: usize) -> Self {
        Self {
            theta_deg: vec![theta_deg],
            delta_phi_deg,
            count_per_ring,
            radius: default_radius(),
            target: Vec3::zeros(),
            intrinsics: Intrinsics::default(),
            phi_offset_deg: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        if self.theta_deg.is_empty() {
            return Err(CameraError::InvalidRig("at least one polar angle is required".into()));
        }
        if self.count_per_ring == 0 {
            return Err(CameraError::InvalidRig("count_per_ring must be at least 1".into()));
        }
        if !(self.delta_phi_deg > 0.0) {
            return Err(CameraError::InvalidRig("delta_phi_deg must be positive".into()));
        }
        if self.count_per_ring as f64 * self.delta_phi_deg > 360.0 + 1e-9 {
            return Err(CameraError::InvalidRig(format!(
                "{} views x {} deg exceeds a full ring",
                self.count_per_ring, self.delta_phi_deg
            )));
        }
        Ok(())
    }
}

/// A camera together with the pose that produced it and its ring position.
#[derive(Clone, Debug, PartialEq)]
pub struct RigCamera {
    pub camera: Camera,
    pub pose: SphericalPose,
    pub ring: usize,
    pub index_in_ring: usize,
}

pub fn generate_rig(spec: &RigSpec) -> Result<Vec<RigCamera>, CameraError> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.theta_deg.len() * spec.count_per_ring);
    for (ring, &theta) in spec.theta_deg.iter().enumerate() {
        for k in 0..spec.count_per_ring {
            let phi = spec.phi_offset_deg + k as f64 * spec.delta_phi_deg;
            let pose = SphericalPose::new(theta, phi, spec.radius, spec.target)?;
            let camera = pose_to_camera(&pose, &spec.intrinsics)?;
            out.push(RigCamera { camera, pose, ring, index_in_ring: k });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct CameraRecord {
    theta_deg: f64,
    phi_deg: f64,
    radius: f64,
    target: [f64; 3],
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: usize,
    height: usize,
    #[serde(rename = "R")]
    rotation: [f64; 9],
    t: [f64; 3],
    #[serde(default)]
    ring: usize,
    #[serde(default)]
    index_in_ring: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CameraSet {
    cameras: Vec<CameraRecord>,
}

pub fn cameras_to_json(rig: &[RigCamera]) -> String {
    let cameras = rig
        .iter()
        .map(|rc| {
            let c = &rc.camera;
            let r = &c.rotation;
            CameraRecord {
                theta_deg: rc.pose.theta_deg,
                phi_deg: rc.pose.phi_deg,
                radius: rc.pose.radius,
                target: rc.pose.target.into(),
                fx: c.intrinsics.fx,
                fy: c.intrinsics.fy,
                cx: c.intrinsics.cx,
                cy: c.intrinsics.cy,
                width: c.intrinsics.width,
                height: c.intrinsics.height,
                rotation: [r[(0, 0)], r[(0, 1)], r[(0, 2)], r[(1, 0)], r[(1, 1)], r[(1, 2)], r[(2, 0)], r[(2, 1)], r[(2, 2)]],
                t: c.translation.into(),
                ring: rc.ring,
                index_in_ring: rc.index_in_ring,
            }
        })
        .collect();
    serde_json::to_string_pretty(&CameraSet { cameras }).expect("camera set serializes")
}

pub fn cameras_from_json(text: &str) -> Result<Vec<RigCamera>, CameraError> {
    let set: CameraSet = serde_json::from_str(text)
        .map_err(|e| CameraError::File { path: "<json>".into(), message: e.to_string() })?;
    set.cameras
        .into_iter()
        .map(|rec| {
            let intrinsics = Intrinsics { fx: rec.fx, fy: rec.fy, cx: rec.cx, cy: rec.cy, width: rec.width, height: rec.height };
            let camera = Camera::new(intrinsics, Matrix3::from_row_slice(&rec.rotation), Vec3::from(rec.t))?;
            let pose = SphericalPose::new(rec.theta_deg, rec.phi_deg, rec.radius, Vec3::from(rec.target))?;
            Ok(RigCamera { camera, pose, ring: rec.ring, index_in_ring: rec.index_in_ring })
        })
        .collect()
}

pub fn write_cameras(rig: &[RigCamera], path: &Path) -> Result<(), CameraError> {
    fs::write(path, cameras_to_json(rig))
        .map_err(|e| CameraError::File { path: path.display().to_string(), message: e.to_string() })
}

pub fn read_cameras(path: &Path) -> Result<Vec<RigCamera>, CameraError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CameraError::File { path: path.display().to_string(), message: e.to_string() })?;
    cameras_from_json(&text).map_err(|e| match e {
        CameraError::File { message, .. } => CameraError::File { path: path.display().to_string(), message },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn approx(a: &Vec3, b: &Vec3, tol: f64) -> bool {
        (a - b).amax() < tol
    }

    #[test]
    fn equator_pose() {
        let pose = SphericalPose::new(90.0, 0.0, 2.0, Vec3::zeros()).unwrap();
        let cam = pose_to_camera(&pose, &Intrinsics::default()).unwrap();
        assert!(approx(&cam.center(), &Vec3::new(2.0, 0.0, 0.0), 1e-12));
        assert!(approx(&cam.forward(), &Vec3::new(-1.0, 0.0, 0.0), 1e-12));
        match cam.project(&Vec3::zeros()) {
            Projection::Visible { u, v, depth } => {
                assert!((u - 128.0).abs() < 1e-9 && (v - 128.0).abs() < 1e-9 && (depth - 2.0).abs() < 1e-12);
            }
            Projection::BehindCamera => panic!("origin should be visible"),
        }
        // +z appears toward the top of the image (smaller v).
        let Projection::Visible { v, .. } = cam.project(&Vec3::new(0.0, 0.0, 0.5)) else { panic!() };
        assert!(v < 128.0);
    }

    #[test]
    fn pole_fallback() {
        for phi in [0.0, 77.0, 300.0] {
            let pose = SphericalPose::new(0.0001, phi, 3.0, Vec3::zeros()).unwrap();
            let cam = pose_to_camera(&pose, &Intrinsics::default()).unwrap();
            assert!(cam.forward().z < -0.999);
        }
        let pose = SphericalPose::new(179.5, 10.0, 3.0, Vec3::zeros()).unwrap();
        assert!(pose_to_camera(&pose, &Intrinsics::default()).is_ok());
    }

    #[test]
    fn invalid_poses() {
        assert!(SphericalPose::new(0.0, 0.0, 1.0, Vec3::zeros()).is_err());
        assert!(SphericalPose::new(180.0, 0.0, 1.0, Vec3::zeros()).is_err());
        assert!(SphericalPose::new(45.0, 0.0, 0.0, Vec3::zeros()).is_err());
        assert_eq!(SphericalPose::new(45.0, -90.0, 1.0, Vec3::zeros()).unwrap().phi_deg, 270.0);
        assert_eq!(SphericalPose::new(45.0, 720.0, 1.0, Vec3::zeros()).unwrap().phi_deg, 0.0);
    }

    #[test]
    fn on_axis_point_projects_to_principal_point() {
        let pose = SphericalPose::new(33.0, 211.0, 4.0, Vec3::new(0.1, 0.2, 0.3)).unwrap();
        let k = Intrinsics { cx: 100.5, cy: 90.25, ..Intrinsics::default() };
        let cam = pose_to_camera(&pose, &k).unwrap();
        let p = cam.center() + cam.forward() * 1.75;
        let Projection::Visible { u, v, depth } = cam.project(&p) else { panic!() };
        assert!((u - 100.5).abs() < 1e-9 && (v - 90.25).abs() < 1e-9 && (depth - 1.75).abs() < 1e-9);
        assert_eq!(cam.project(&(cam.center() - cam.forward())), Projection::BehindCamera);
    }

    #[test]
    fn rig_counts_and_order() {
        let rig = generate_rig(&RigSpec::ring(45.0, 10.0, 36)).unwrap();
        assert_eq!(rig.len(), 36);
        assert_eq!(rig[35].pose.phi_deg, 350.0);
        let rig = generate_rig(&RigSpec::ring(45.0, 30.0, 12)).unwrap();
        assert_eq!(rig.len(), 12);
        assert_eq!(rig[11].pose.phi_deg, 330.0);
        let spec = RigSpec { theta_deg: vec![30.0, 45.0, 75.0], ..RigSpec::ring(0.0, 90.0, 4) };
        let rig = generate_rig(&spec).unwrap();
        assert_eq!(rig.len(), 12);
        let order: Vec<(f64, f64)> = rig.iter().map(|r| (r.pose.theta_deg, r.pose.phi_deg)).collect();
        assert_eq!(order[0], (30.0, 0.0));
        assert_eq!(order[5], (45.0, 90.0));
        assert_eq!(order[11], (75.0, 270.0));
        assert_eq!(generate_rig(&spec).unwrap(), rig);
    }

    #[test]
    fn rig_validation() {
        assert!(generate_rig(&RigSpec::ring(45.0, 10.0, 37)).is_err());
        assert!(generate_rig(&RigSpec::ring(45.0, 0.0, 3)).is_err());
        assert!(generate_rig(&RigSpec::ring(45.0, 10.0, 0)).is_err());
        assert!(generate_rig(&RigSpec::ring(45.0, 120.0, 3)).is_ok());
    }

    #[test]
    fn json_roundtrip() {
        let spec = RigSpec { theta_deg: vec![30.0, 60.0], ..RigSpec::ring(0.0, 45.0, 8) };
        let rig = generate_rig(&spec).unwrap();
        let back = cameras_from_json(&cameras_to_json(&rig)).unwrap();
        assert_eq!(back, rig);
        let value: serde_json::Value = serde_json::from_str(&cameras_to_json(&rig)).unwrap();
        assert_eq!(value["cameras"][0]["R"].as_array().unwrap().len(), 9);
        assert_eq!(value["cameras"][0]["t"].as_array().unwrap().len(), 3);
    }

    proptest! {
        #[test]
        fn pose_properties(theta in 0.5f64..179.5, phi in -720.0f64..720.0, radius in 0.1f64..50.0,
                           tx in -3.0f64..3.0, ty in -3.0f64..3.0, tz in -3.0f64..3.0) {
            let target = Vec3::new(tx, ty, tz);
            let pose = SphericalPose::new(theta, phi, radius, target).unwrap();
            let cam = pose_to_camera(&pose, &Intrinsics::default()).unwrap();
            prop_assert!(((cam.center() - target).norm() - radius).abs() < 1e-9 * radius.max(1.0));
            let r = cam.rotation;
            prop_assert!((r * r.transpose() - Matrix3::identity()).amax() < 1e-9);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
            prop_assert!(((target - cam.center()).normalize() - cam.forward()).amax() < 1e-9);
        }

        #[test]
        fn ray_passes_through_projected_point(theta in 1.0f64..179.0, phi in 0.0f64..360.0,
                                              x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
            let pose = SphericalPose::new(theta, phi, 3.0, Vec3::zeros()).unwrap();
            let cam = pose_to_camera(&pose, &Intrinsics::default()).unwrap();
            let p = Vec3::new(x, y, z);
            let Projection::Visible { u, v, depth } = cam.project(&p) else { return Ok(()) };
            let (o, d) = cam.ray(u, v);
            let dist = (p - o).cross(&d).norm();
            prop_assert!(dist < 1e-6);
            prop_assert!((cam.unproject(u, v, depth) - p).amax() < 1e-6);
        }
    }
}
