use serde::{Deserialize, Serialize};

use super::pipeline::{run_pipeline, StageTimings};
use super::PipelineConfig;
use crate::metrics::Psnr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Images,
    Theta,
    Overlap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_images: usize,
    pub theta_deg: f64,
    pub delta_phi_deg: f64,
    pub cd: Option<f64>,
    pub iou: Option<f64>,
    pub psnr_db: Option<Psnr>,
    pub ssim: Option<f64>,
    pub lpips: Option<f64>,
    pub timings: Option<StageTimings>,
    /// `ok` or `error`.
    pub status: String,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Drops wall-clock timings so results can be compared byte-for-byte.
    pub fn without_timings(mut self) -> Self {
        for r in &mut self.rows {
            r.timings = None;
        }
        self
    }
}

fn run_row(base: &PipelineConfig, index: usize, theta: f64, n: usize, delta_phi: f64) -> SweepRow {
    let mut cfg = base.clone();
    cfg.rig.theta_deg = vec![theta];
    cfg.rig.count_per_ring = n;
    cfg.rig.delta_phi_deg = delta_phi;
    cfg.output_dir = base.output_dir.join(format!("row_{index:02}"));
    let mut row = SweepRow {
        n_images: n,
        theta_deg: theta,
        delta_phi_deg: delta_phi,
        cd: None,
        iou: None,
        psnr_db: None,
        ssim: None,
        lpips: None,
        timings: None,
        status: "ok".into(),
        error: None,
    };
    match run_pipeline(&cfg) {
        Ok(out) => {
            row.cd = Some(out.metrics.cd);
            row.iou = Some(out.metrics.iou);
            row.psnr_db = out.metrics.psnr_db;
            row.ssim = out.metrics.ssim;
            row.lpips = out.metrics.lpips;
            row.timings = Some(out.timings);
        }
        Err(e) => {
            row.status = "error".into();
            row.error = Some(e.to_string());
        }
    }
    row
}

fn base_theta(base: &PipelineConfig) -> f64 {
    base.rig.theta_deg.first().copied().unwrap_or(45.0)
}

/// One run per view count; with `full_ring` the views are spread evenly
/// over 360°, otherwise the base Δφ is kept. Rows run one after another so
/// that stage timings are not distorted by each other.
pub fn sweep_image_count(base: &PipelineConfig, counts: &[usize], full_ring: bool) -> SweepResult {
    let theta = base_theta(base);
    let rows = counts
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let dphi = if full_ring { 360.0 / n.max(1) as f64 } else { base.rig.delta_phi_deg };
            run_row(base, i, theta, n, dphi)
        })
        .collect();
    SweepResult { kind: SweepKind::Images, rows }
}

/// One full-ring run per polar angle, keeping the base view count.
pub fn sweep_theta(base: &PipelineConfig, thetas: &[f64]) -> SweepResult {
    let n = base.rig.count_per_ring;
    let rows = thetas.iter().enumerate().map(|(i, &t)| run_row(base, i, t, n, 360.0 / n as f64)).collect();
    SweepResult { kind: SweepKind::Theta, rows }
}

/// One run per `(n_images, Δφ)`; arcs shorter than a full ring are allowed.
pub fn sweep_overlap(base: &PipelineConfig, pairs: &[(usize, f64)]) -> SweepResult {
    let theta = base_theta(base);
    let rows = pairs.iter().enumerate().map(|(i, &(n, d))| run_row(base, i, theta, n, d)).collect();
    SweepResult { kind: SweepKind::Overlap, rows }
}
