use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{scenes, ConfigError};
use crate::camera::RigSpec;
use crate::clean::DEFAULT_MIN_FACE_FRACTION;
use crate::geometry::{load_mesh, Rgb, TriangleMesh, Vec3};
use crate::metrics::{GeomConfig, SsimParams};
use crate::render::{Scene, SceneObject};
use crate::segment::DEFAULT_PADDING_PX;

/// One scene object. `mesh` is a file path or `builtin:<name>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub name: String,
    pub mesh: String,
    #[serde(default)]
    pub offset: [f64; 3],
}

impl ObjectSpec {
    pub fn load(&self, base: &Path) -> Result<TriangleMesh, ConfigError> {
        let mesh = match self.mesh.strip_prefix("builtin:") {
            Some(name) => scenes::builtin(name).ok_or_else(|| ConfigError::Invalid(format!("unknown built-in mesh '{name}'")))?,
            None => load_mesh(base.join(&self.mesh)).map_err(|e| ConfigError::Invalid(format!("object '{}': {e}", self.name)))?,
        };
        let offset = Vec3::from(self.offset);
        Ok(if offset == Vec3::zeros() { mesh } else { mesh.map_vertices(|v| v + offset) })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CleanConfig {
    #[serde(default = "default_min_face_fraction")]
    pub min_face_fraction: f64,
    #[serde(default)]
    pub keep_largest: bool,
}

impl Default for CleanConfig {
    fn default() -> Self {
        Self { min_face_fraction: DEFAULT_MIN_FACE_FRACTION, keep_largest: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackConfig {
    #[serde(default = "default_candidates")]
    pub candidates: usize,
    #[serde(default = "default_min_views")]
    pub min_views: usize,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self { candidates: default_candidates(), min_views: default_min_views() }
    }
}

/// Texture-evaluation cameras, never used for reconstruction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoldoutConfig {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_theta_offset")]
    pub theta_offset_deg: f64,
    #[serde(default = "default_holdout_count")]
    pub count: usize,
}

impl Default for HoldoutConfig {
    fn default() -> Self {
        Self { enabled: true, theta_offset_deg: default_theta_offset(), count: default_holdout_count() }
    }
}

impl HoldoutConfig {
    /// Ring at θ + offset (θ − offset if that would leave (0°, 180°)),
    /// azimuths interleaved half a step off the origin.
    pub fn rig(&self, input: &RigSpec) -> RigSpec {
        let theta = input.theta_deg.first().copied().unwrap_or(45.0);
        let up = theta + self.theta_offset_deg;
        let theta = if up > 0.0 && up < 180.0 { up } else { theta - self.theta_offset_deg };
        let step = 360.0 / self.count.max(1) as f64;
        RigSpec {
            theta_deg: vec![theta],
            delta_phi_deg: step,
            count_per_ring: self.count.max(1),
            radius: input.radius,
            target: input.target,
            intrinsics: input.intrinsics,
            phi_offset_deg: step / 2.0,
        }
    }
}

fn default_min_face_fraction() -> f64 {
    DEFAULT_MIN_FACE_FRACTION
}
fn default_candidates() -> usize {
    2000
}
fn default_min_views() -> usize {
    2
}
fn default_true() -> bool {
    true
}
fn default_theta_offset() -> f64 {
    15.0
}
fn default_holdout_count() -> usize {
    8
}
fn default_objects() -> Vec<ObjectSpec> {
    vec![ObjectSpec { name: "figurine".into(), mesh: "builtin:figurine".into(), offset: [0.0; 3] }]
}
fn default_query() -> String {
    "figurine".into()
}
fn default_rig() -> RigSpec {
    RigSpec::ring(45.0, 10.0, 36)
}
fn default_padding() -> usize {
    DEFAULT_PADDING_PX
}
fn default_resolution() -> usize {
    crate::reconstruct::DEFAULT_RESOLUTION
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_objects")]
    pub objects: Vec<ObjectSpec>,
    #[serde(default = "default_query")]
    pub query: String,
    #[serde(default = "default_rig")]
    pub rig: RigSpec,
    #[serde(default)]
    pub background: Rgb,
    #[serde(default = "default_padding")]
    pub padding_px: usize,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default)]
    pub clean: CleanConfig,
    #[serde(default)]
    pub tracks: TrackConfig,
    #[serde(default)]
    pub metrics: GeomConfig,
    #[serde(default)]
    pub ssim: SsimParams,
    #[serde(default)]
    pub holdout: HoldoutConfig,
    /// Optional LPIPS feature files, one per held-out view.
    #[serde(default)]
    pub lpips_features: Vec<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Write per-view PPM/PGM images.
    #[serde(default = "default_true")]
    pub write_views: bool,
    /// Relative mesh paths resolve against this directory.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.objects.is_empty() {
            return bad("at least one object is required".into());
        }
        for o in &self.objects {
            if o.mesh.strip_prefix("builtin:").is_none() && !self.base_dir.join(&o.mesh).is_file() {
                return bad(format!("mesh file for '{}' not found: {}", o.name, o.mesh));
            }
        }
        self.rig.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.resolution < 8 {
            return bad("resolution must be at least 8".into());
        }
        if !(self.clean.min_face_fraction > 0.0 && self.clean.min_face_fraction < 1.0) {
            return bad("clean.min_face_fraction must lie in (0, 1)".into());
        }
        if self.tracks.min_views < 2 {
            return bad("tracks.min_views must be at least 2".into());
        }
        if self.metrics.samples == 0 || self.metrics.resolution < 2 {
            return bad("metrics.samples must be ≥ 1 and metrics.resolution ≥ 2".into());
        }
        if self.background.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return bad("background must lie in [0, 1]".into());
        }
        for f in &self.lpips_features {
            if !self.base_dir.join(f).is_file() {
                return bad(format!("LPIPS feature file not found: {}", f.display()));
            }
        }
        Ok(())
    }

    pub fn build_scene(&self) -> Result<Scene, ConfigError> {
        let objects = self
            .objects
            .iter()
            .map(|o| Ok(SceneObject { name: o.name.clone(), mesh: o.load(&self.base_dir)? }))
            .collect::<Result<Vec<_>, ConfigError>>()?;
        Scene::new(objects, self.background).map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}
