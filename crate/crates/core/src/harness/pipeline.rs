use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{ConfigError, PipelineConfig};
use crate::camera::{generate_rig, write_cameras, Camera, RigCamera};
use crate::clean::{clean, CleanReport};
use crate::geometry::{bounding_box, save_mesh, TriangleMesh};
use crate::metrics::{evaluate_geometry, evaluate_texture, read_feature_pair, GeomMetrics, Psnr, TextureMetrics};
use crate::reconstruct::{carve, colorize, extract_mesh, sample_tracks, CarveStats, ColorizeReport};
use crate::render::{render_rig, Scene};
use crate::segment::{segment_views, Query, SegmentationSummary};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub segmentation_s: f64,
    /// Rendering, carving and track sampling.
    pub sparse_s: f64,
    /// Surface extraction, cleaning and coloring.
    pub mesh_s: f64,
    pub total_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Render,
    Segmentation,
    Reconstruction,
    Cleaning,
    Evaluation,
    Output,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
        let s = serde_json::to_value(self).expect("stage serializes");
        f.write_str(s.as_str().expect("stage is a string"))
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
}

impl PipelineError {
    fn at(stage: Stage) -> impl FnOnce(String) -> PipelineError {
        move |message| PipelineError { stage, message }
    }

    pub fn is_config(&self) -> bool {
        self.stage == Stage::Config
    }
}

impl From<ConfigError> for PipelineError {
    fn from(e: ConfigError) -> Self {
        PipelineError { stage: Stage::Config, message: e.to_string() }
    }
}

/// Contents of `metrics.json`: everything here is deterministic for a fixed
/// config, so no timings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cd: f64,
    pub iou: f64,
    pub psnr_db: Option<Psnr>,
    pub ssim: Option<f64>,
    pub lpips: Option<f64>,
    pub config: serde_json::Value,
    pub geometry: GeomMetrics,
    pub texture: Option<TextureMetrics>,
    pub tracks: usize,
    pub carve: CarveStats,
    pub clean: CleanReport,
    pub colorize: ColorizeReport,
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub mesh: TriangleMesh,
    pub metrics: MetricsReport,
    pub timings: StageTimings,
}

#[derive(Serialize)]
struct RunRecord<'a> {
    status: &'a str,
    stage: Option<Stage>,
    error: Option<&'a str>,
    timings: Option<StageTimings>,
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    fs::write(path, text).map_err(|e| PipelineError { stage: Stage::Output, message: format!("{}: {e}", path.display()) })
}

pub(crate) fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes") + "\n"
}

/// Full pipeline: render → segment → carve + tracks → extract → clean →
/// colorize → evaluate. Intermediates land in `config.output_dir`, and the
/// outcome (including the failing stage) in `run.json`.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    config.validate()?;
    let out = &config.output_dir;
    fs::create_dir_all(out).map_err(|e| PipelineError { stage: Stage::Output, message: format!("{}: {e}", out.display()) })?;
    write_text(&out.join("config.json"), &(config.to_json() + "\n"))?;
    let result = run_stages(config, out);
    let record = match &result {
        Ok(o) => RunRecord { status: "ok", stage: None, error: None, timings: Some(o.timings) },
        Err(e) => RunRecord { status: "error", stage: Some(e.stage), error: Some(&e.message), timings: None },
    };
    write_text(&out.join("run.json"), &json(&record))?;
    result
}

fn run_stages(config: &PipelineConfig, out: &Path) -> Result<PipelineOutput, PipelineError> {
    let start = Instant::now();
    let scene = config.build_scene()?;
    let rig = generate_rig(&config.rig).map_err(|e| PipelineError::from(ConfigError::Invalid(e.to_string())))?;
    let cameras: Vec<Camera> = rig.iter().map(|r| r.camera).collect();

    let t = Instant::now();
    let renders = render_rig(&scene, &cameras).map_err(|e| PipelineError::at(Stage::Render)(e.to_string()))?;
    let mut sparse_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let query = Query::new(&config.query).map_err(|e| PipelineError::at(Stage::Segmentation)(e.to_string()))?;
    let (masked, summary) =
        segment_views(&scene, &renders, &query, config.padding_px).map_err(|e| PipelineError::at(Stage::Segmentation)(e.to_string()))?;
    let segmentation_s = t.elapsed().as_secs_f64();

    write_cameras(&rig, &out.join("cameras.json")).map_err(|e| PipelineError::at(Stage::Output)(e.to_string()))?;
    write_text(&out.join("segmentation.json"), &json(&summary))?;
    if config.write_views {
        write_views(&rig, &renders, &masked, &summary, out)?;
    }

    let gt = &scene.object(&summary.object).expect("resolved object exists").mesh;
    let t = Instant::now();
    let silhouettes: Vec<_> = renders.iter().zip(&cameras).map(|(r, c)| (&r.masks[&summary.object], c)).collect();
    let reconstruction_err = |e: String| PipelineError { stage: Stage::Reconstruction, message: e };
    let bounds = bounding_box(gt).map_err(|e| reconstruction_err(e.to_string()))?.padded(0.1);
    let hull = carve(&silhouettes, &bounds, config.resolution).map_err(|e| reconstruction_err(e.to_string()))?;
    let tracks = sample_tracks(gt, &silhouettes, config.tracks.candidates, config.tracks.min_views, config.seed);
    sparse_s += t.elapsed().as_secs_f64();

    let t = Instant::now();
    let raw = extract_mesh(&hull.grid, 0.5).map_err(|e| reconstruction_err(e.to_string()))?;
    let (cleaned, clean_report) = clean(&raw, config.clean.min_face_fraction, config.clean.keep_largest)
        .map_err(|e| PipelineError::at(Stage::Cleaning)(e.to_string()))?;
    let color_views: Vec<_> = masked.iter().zip(&cameras).collect();
    let (mesh, colorize_report) = colorize(&cleaned, &color_views, hull.grid.cell_size);
    let mesh_s = t.elapsed().as_secs_f64();

    let carve_stats = hull.stats(config.resolution);
    let mut carve_json = serde_json::to_value(&carve_stats).expect("stats serialize");
    carve_json["timings"] = serde_json::json!({ "sparse_s": sparse_s });
    write_text(&out.join("carve_stats.json"), &json(&carve_json))?;
    write_text(&out.join("tracks.json"), &(tracks.to_json() + "\n"))?;
    write_text(&out.join("clean_report.json"), &json(&clean_report))?;
    let save = |m: &TriangleMesh, name: &str| save_mesh(m, out.join(name)).map_err(|e| PipelineError::at(Stage::Output)(e.to_string()));
    save(&raw, "hull.ply")?;
    save(&mesh, "mesh.ply")?;

    let eval_err = PipelineError::at(Stage::Evaluation);
    let geometry = evaluate_geometry(&mesh, gt, &config.metrics).map_err(|e| eval_err(e.to_string()))?;
    let texture = evaluate_holdout(config, gt, &summary.object, &mesh, out)?;

    let metrics = MetricsReport {
        cd: geometry.chamfer,
        iou: geometry.iou,
        psnr_db: texture.as_ref().map(|t| t.psnr_db),
        ssim: texture.as_ref().map(|t| t.ssim),
        lpips: texture.as_ref().and_then(|t| t.lpips),
        config: serde_json::json!({
            "geometry": config.metrics,
            "ssim": config.ssim,
            "holdout": config.holdout,
            "resolution": config.resolution,
            "rig": config.rig,
            "seed": config.seed,
        }),
        geometry,
        texture,
        tracks: tracks.len(),
        carve: carve_stats,
        clean: clean_report,
        colorize: colorize_report,
    };
    write_text(&out.join("metrics.json"), &json(&metrics))?;
    let timings = StageTimings { segmentation_s, sparse_s, mesh_s, total_s: start.elapsed().as_secs_f64() };
    Ok(PipelineOutput { mesh, metrics, timings })
}

pub(crate) fn write_views(
    rig: &[RigCamera],
    renders: &[crate::render::RenderOutput],
    masked: &[crate::segment::MaskedView],
    summary: &SegmentationSummary,
    out: &Path,
) -> Result<(), PipelineError> {
    for ((rc, r), m) in rig.iter().zip(renders).zip(masked) {
        let tag = view_tag(rc);
        let w = |res: Result<(), crate::render::RenderError>| res.map_err(|e| PipelineError { stage: Stage::Output, message: e.to_string() });
        w(r.rgb.write(&out.join("views").join(format!("view_{tag}.ppm"))))?;
        for (name, mask) in &r.masks {
            w(mask.write(&out.join("masks").join(format!("mask_{name}_{tag}.pgm"))))?;
        }
        w(m.rgb_masked.write(&out.join("masked").join(format!("masked_{tag}.ppm"))))?;
        w(m.padded_mask.write(&out.join("masked").join(format!("padded_{}_{tag}.pgm", summary.object))))?;
    }
    Ok(())
}

/// File-name suffix of a rig view: `<ring>_<index>`.
pub(crate) fn view_tag(rc: &RigCamera) -> String {
    format!("{}_{:03}", rc.ring, rc.index_in_ring)
}

/// Renders the ground-truth object and the reconstruction from the held-out
/// ring and compares them.
pub(crate) fn evaluate_holdout(
    config: &PipelineConfig,
    gt: &TriangleMesh,
    object: &str,
    recon: &TriangleMesh,
    out: &Path,
) -> Result<Option<TextureMetrics>, PipelineError> {
    if !config.holdout.enabled {
        return Ok(None);
    }
    let err = |e: String| PipelineError { stage: Stage::Evaluation, message: e };
    let rig = generate_rig(&config.holdout.rig(&config.rig)).map_err(|e| err(e.to_string()))?;
    let cams: Vec<Camera> = rig.iter().map(|r| r.camera).collect();
    let gt_scene = Scene::new(vec![crate::render::SceneObject { name: object.into(), mesh: gt.clone() }], config.background)
        .map_err(|e| err(e.to_string()))?;
    let recon_scene = Scene::new(vec![crate::render::SceneObject { name: object.into(), mesh: recon.clone() }], config.background)
        .map_err(|e| err(e.to_string()))?;
    let gt_imgs: Vec<_> = render_rig(&gt_scene, &cams).map_err(|e| err(e.to_string()))?.into_iter().map(|r| r.rgb).collect();
    let recon_imgs: Vec<_> = render_rig(&recon_scene, &cams).map_err(|e| err(e.to_string()))?.into_iter().map(|r| r.rgb).collect();
    if config.write_views {
        for (i, (g, r)) in gt_imgs.iter().zip(&recon_imgs).enumerate() {
            let w = |img: &crate::render::ImageBuffer, name: String| {
                img.write(&out.join("holdout").join(name)).map_err(|e| PipelineError { stage: Stage::Output, message: e.to_string() })
            };
            w(g, format!("gt_{i:03}.ppm"))?;
            w(r, format!("recon_{i:03}.ppm"))?;
        }
    }
    let features = config
        .lpips_features
        .iter()
        .map(|f| read_feature_pair(&config.base_dir.join(f)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| err(e.to_string()))?;
    let feats = (!features.is_empty()).then_some(features.as_slice());
    evaluate_texture(&recon_imgs, &gt_imgs, feats, &config.ssim).map(Some).map_err(|e| err(e.to_string()))
}
