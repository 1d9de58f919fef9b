//! The pipeline split into resumable steps that communicate through files in
//! the output directory. Each step is what the matching CLI subcommand runs.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;

use super::pipeline::{evaluate_holdout, json, view_tag, write_text, PipelineError, Stage};
use super::PipelineConfig;
use crate::camera::{generate_rig, read_cameras, write_cameras, Camera, RigCamera};
use crate::clean::{clean, CleanReport};
use crate::geometry::{bounding_box, load_mesh, save_mesh, TriangleMesh};
use crate::metrics::{evaluate_geometry, GeomMetrics, TextureMetrics};
use crate::reconstruct::{carve, colorize, extract_mesh, sample_tracks, CarveStats};
use crate::render::{render_rig, BinaryMask, ImageBuffer};
use crate::segment::{mask_view, resolve_name, MaskedView, Query, SegmentationSummary};

fn fail(stage: Stage) -> impl Fn(String) -> PipelineError {
    move |message| PipelineError { stage, message }
}

fn read_json<T: DeserializeOwned>(path: &Path, stage: Stage) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| fail(stage)(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| fail(stage)(format!("{}: {e}", path.display())))
}

fn prepare(config: &PipelineConfig) -> Result<&Path, PipelineError> {
    config.validate()?;
    let out = config.output_dir.as_path();
    fs::create_dir_all(out).map_err(|e| fail(Stage::Output)(format!("{}: {e}", out.display())))?;
    write_text(&out.join("config.json"), &(config.to_json() + "\n"))?;
    Ok(out)
}

fn cameras(out: &Path, stage: Stage) -> Result<Vec<RigCamera>, PipelineError> {
    read_cameras(&out.join("cameras.json")).map_err(|e| fail(stage)(e.to_string()))
}

/// The object the query selects, with its ground-truth mesh.
fn target(config: &PipelineConfig, stage: Stage) -> Result<(String, TriangleMesh), PipelineError> {
    let query = Query::new(&config.query).map_err(|e| fail(stage)(e.to_string()))?;
    let name = resolve_name(config.objects.iter().map(|o| o.name.as_str()), &query).map_err(|e| fail(stage)(e.to_string()))?;
    let spec = config.objects.iter().find(|o| o.name == name).expect("resolved name is an object");
    Ok((name, spec.load(&config.base_dir)?))
}

fn raw_mask(out: &Path, object: &str, rc: &RigCamera, stage: Stage) -> Result<BinaryMask, PipelineError> {
    BinaryMask::read(&out.join("masks").join(format!("mask_{object}_{}.pgm", view_tag(rc)))).map_err(|e| fail(stage)(e.to_string()))
}

/// Writes `cameras.json` for the configured rig.
pub fn stage_rig(config: &PipelineConfig) -> Result<Vec<RigCamera>, PipelineError> {
    let out = prepare(config)?;
    let rig = generate_rig(&config.rig).map_err(|e| fail(Stage::Config)(e.to_string()))?;
    write_cameras(&rig, &out.join("cameras.json")).map_err(|e| fail(Stage::Output)(e.to_string()))?;
    Ok(rig)
}

/// Renders every view of `cameras.json` (generated from the config when
/// absent) into `views/` and per-object masks into `masks/`.
pub fn stage_render(config: &PipelineConfig) -> Result<usize, PipelineError> {
    let out = prepare(config)?;
    let rig = if out.join("cameras.json").is_file() { cameras(out, Stage::Render)? } else { stage_rig(config)? };
    let scene = config.build_scene()?;
    let cams: Vec<Camera> = rig.iter().map(|r| r.camera).collect();
    let renders = render_rig(&scene, &cams).map_err(|e| fail(Stage::Render)(e.to_string()))?;
    let w = |res: Result<(), crate::render::RenderError>| res.map_err(|e| fail(Stage::Output)(e.to_string()));
    for (rc, r) in rig.iter().zip(&renders) {
        let tag = view_tag(rc);
        w(r.rgb.write(&out.join("views").join(format!("view_{tag}.ppm"))))?;
        for (name, mask) in &r.masks {
            w(mask.write(&out.join("masks").join(format!("mask_{name}_{tag}.pgm"))))?;
        }
    }
    Ok(renders.len())
}

/// Resolves the query, pads the selected object's masks and writes the
/// cropped views to `masked/` plus `segmentation.json`.
pub fn stage_segment(config: &PipelineConfig) -> Result<SegmentationSummary, PipelineError> {
    let out = prepare(config)?;
    let rig = cameras(out, Stage::Segmentation)?;
    let (object, _) = target(config, Stage::Segmentation)?;
    let mut empty_views = Vec::with_capacity(rig.len());
    for (i, rc) in rig.iter().enumerate() {
        let tag = view_tag(rc);
        let rgb = ImageBuffer::read(&out.join("views").join(format!("view_{tag}.ppm"))).map_err(|e| fail(Stage::Segmentation)(e.to_string()))?;
        let raw = raw_mask(out, &object, rc, Stage::Segmentation)?;
        let m = mask_view(&rgb, &raw, config.padding_px, i);
        let w = |res: Result<(), crate::render::RenderError>| res.map_err(|e| fail(Stage::Output)(e.to_string()));
        w(m.rgb_masked.write(&out.join("masked").join(format!("masked_{tag}.ppm"))))?;
        w(m.padded_mask.write(&out.join("masked").join(format!("padded_{object}_{tag}.pgm"))))?;
        empty_views.push(m.target_empty);
    }
    let summary = SegmentationSummary { query: config.query.clone(), object, padding_px: config.padding_px, empty_views };
    write_text(&out.join("segmentation.json"), &json(&summary))?;
    Ok(summary)
}

/// Carves the hull from the raw masks of the segmented object and samples
/// tracks; writes `hull.ply`, `tracks.json` and `carve_stats.json`.
pub fn stage_reconstruct(config: &PipelineConfig) -> Result<CarveStats, PipelineError> {
    let out = prepare(config)?;
    let stage = Stage::Reconstruction;
    let rig = cameras(out, stage)?;
    let summary: SegmentationSummary = read_json(&out.join("segmentation.json"), stage)?;
    let (_, gt) = target(config, stage)?;
    let masks = rig.iter().map(|rc| raw_mask(out, &summary.object, rc, stage)).collect::<Result<Vec<_>, _>>()?;
    let views: Vec<_> = masks.iter().zip(rig.iter().map(|r| &r.camera)).collect();
    let bounds = bounding_box(&gt).map_err(|e| fail(stage)(e.to_string()))?.padded(0.1);
    let hull = carve(&views, &bounds, config.resolution).map_err(|e| fail(stage)(e.to_string()))?;
    let tracks = sample_tracks(&gt, &views, config.tracks.candidates, config.tracks.min_views, config.seed);
    let raw = extract_mesh(&hull.grid, 0.5).map_err(|e| fail(stage)(e.to_string()))?;
    save_mesh(&raw, out.join("hull.ply")).map_err(|e| fail(Stage::Output)(e.to_string()))?;
    write_text(&out.join("tracks.json"), &(tracks.to_json() + "\n"))?;
    let stats = hull.stats(config.resolution);
    write_text(&out.join("carve_stats.json"), &json(&stats))?;
    Ok(stats)
}

/// Removes floaters from `hull.ply`, colors the result from the cropped
/// views and writes `mesh.ply` and `clean_report.json`.
pub fn stage_clean(config: &PipelineConfig) -> Result<CleanReport, PipelineError> {
    let out = prepare(config)?;
    let rig = cameras(out, Stage::Cleaning)?;
    let stats: CarveStats = read_json(&out.join("carve_stats.json"), Stage::Cleaning)?;
    let hull = load_mesh(out.join("hull.ply")).map_err(|e| fail(Stage::Cleaning)(e.to_string()))?;
    let (cleaned, report) =
        clean(&hull, config.clean.min_face_fraction, config.clean.keep_largest).map_err(|e| fail(Stage::Cleaning)(e.to_string()))?;
    let summary: SegmentationSummary = read_json(&out.join("segmentation.json"), Stage::Cleaning)?;
    let masked = rig
        .iter()
        .enumerate()
        .map(|(i, rc)| {
            let tag = view_tag(rc);
            let read_err = |e: crate::render::RenderError| fail(Stage::Cleaning)(e.to_string());
            let rgb_masked = ImageBuffer::read(&out.join("masked").join(format!("masked_{tag}.ppm"))).map_err(read_err)?;
            let padded_mask =
                BinaryMask::read(&out.join("masked").join(format!("padded_{}_{tag}.pgm", summary.object))).map_err(read_err)?;
            let raw_mask = raw_mask(out, &summary.object, rc, Stage::Cleaning)?;
            let target_empty = raw_mask.is_empty();
            Ok(MaskedView { rgb_masked, padded_mask, raw_mask, camera_index: i, target_empty })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let views: Vec<_> = masked.iter().zip(rig.iter().map(|r| &r.camera)).collect();
    let (mesh, _) = colorize(&cleaned, &views, stats.cell_size);
    save_mesh(&mesh, out.join("mesh.ply")).map_err(|e| fail(Stage::Output)(e.to_string()))?;
    write_text(&out.join("clean_report.json"), &json(&report))?;
    Ok(report)
}

/// CD and IoU of `mesh` against the queried ground-truth object; writes
/// `geometry.json`.
pub fn stage_eval_geom(config: &PipelineConfig, mesh: &Path) -> Result<GeomMetrics, PipelineError> {
    let out = prepare(config)?;
    let (_, gt) = target(config, Stage::Evaluation)?;
    let recon = load_mesh(mesh).map_err(|e| fail(Stage::Evaluation)(e.to_string()))?;
    let metrics = evaluate_geometry(&recon, &gt, &config.metrics).map_err(|e| fail(Stage::Evaluation)(e.to_string()))?;
    write_text(&out.join("geometry.json"), &json(&metrics))?;
    Ok(metrics)
}

/// PSNR / SSIM (and LPIPS when feature files are configured) on the held-out
/// ring; writes `texture.json`.
pub fn stage_eval_tex(config: &PipelineConfig, mesh: &Path) -> Result<TextureMetrics, PipelineError> {
    let out = prepare(config)?;
    if !config.holdout.enabled {
        return Err(fail(Stage::Config)("texture evaluation needs holdout.enabled".into()));
    }
    let (object, gt) = target(config, Stage::Evaluation)?;
    let recon = load_mesh(mesh).map_err(|e| fail(Stage::Evaluation)(e.to_string()))?;
    let metrics = evaluate_holdout(config, &gt, &object, &recon, out)?.expect("holdout enabled");
    write_text(&out.join("texture.json"), &json(&metrics))?;
    Ok(metrics)
}
