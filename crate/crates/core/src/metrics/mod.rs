//! Geometric (Chamfer, volumetric IoU) and texture (PSNR, SSIM, LPIPS)
//! evaluation.

mod geometric;
mod image;
mod lpips;

pub use geometric::{chamfer_distance, evaluate_geometry, iou_grids, volumetric_iou, GeomConfig, GeomMetrics};
pub use image::{psnr, ssim, ssim_map, Psnr, SsimParams};
pub use lpips::{
    decode_feature_pair, encode_feature_pair, lpips_from_features, read_feature_pair, write_feature_pair, FeatureLayer,
    FeatureStack,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::GeometryError;
use crate::render::ImageBuffer;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("both volumes are empty; IoU is undefined")]
    EmptyUnion,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("image {width}x{height} is smaller than the {window}x{window} window")]
    ImageTooSmall { width: usize, height: usize, window: usize },
    #[error("{0} recon images vs {1} ground-truth images")]
    LengthMismatch(usize, usize),
    #[error("invalid metric config: {0}")]
    InvalidConfig(String),
    #[error("feature file: {0}")]
    FeatureFile(String),
    #[error("I/O error on {0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextureMetrics {
    /// Mean over pairs with finite PSNR; `Infinite` only if every pair is identical.
    pub psnr_db: Psnr,
    pub ssim: f64,
    pub lpips: Option<f64>,
    pub pairs: usize,
    pub infinite_psnr_pairs: usize,
}

/// Averages PSNR/SSIM over image pairs. LPIPS is filled in only when feature
/// stacks are supplied (one pair per image pair, or any number when the
/// caller evaluates a subset).
pub fn evaluate_texture(
    recon: &[ImageBuffer],
    gt: &[ImageBuffer],
    features: Option<&[(FeatureStack, FeatureStack)]>,
    params: &SsimParams,
) -> Result<TextureMetrics, MetricsError> {
    if recon.len() != gt.len() {
        return Err(MetricsError::LengthMismatch(recon.len(), gt.len()));
    }
    if recon.is_empty() {
        return Err(MetricsError::InvalidConfig("no image pairs to evaluate".into()));
    }
    let mut finite = Vec::new();
    let mut ssims = Vec::new();
    for (r, g) in recon.iter().zip(gt) {
        if let Psnr::Finite(v) = psnr(r, g)? {
            finite.push(v);
        }
        ssims.push(ssim(r, g, params)?);
    }
    let lpips = match features {
        Some(pairs) if !pairs.is_empty() => {
            let mut sum = 0.0;
            for (fx, fy) in pairs {
                sum += lpips_from_features(fx, fy)?;
            }
            Some(sum / pairs.len() as f64)
        }
        _ => None,
    };
    Ok(TextureMetrics {
        psnr_db: if finite.is_empty() { Psnr::Infinite } else { Psnr::Finite(finite.iter().sum::<f64>() / finite.len() as f64) },
        ssim: ssims.iter().sum::<f64>() / ssims.len() as f64,
        lpips,
        pairs: recon.len(),
        infinite_psnr_pairs: recon.len() - finite.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_renders() {
        let imgs: Vec<ImageBuffer> = (0..3).map(|i| ImageBuffer::filled(32, 32, [0.1 * i as f64, 0.5, 0.2])).collect();
        let m = evaluate_texture(&imgs, &imgs, None, &SsimParams::default()).unwrap();
        assert_eq!(m.psnr_db, Psnr::Infinite);
        assert_eq!(m.infinite_psnr_pairs, 3);
        assert!((m.ssim - 1.0).abs() <= 1e-12);
        assert_eq!(m.lpips, None);
        assert!(evaluate_texture(&imgs, &imgs[..2], None, &SsimParams::default()).is_err());
    }

    #[test]
    fn infinite_pairs_excluded_from_mean() {
        let a = ImageBuffer::filled(16, 16, [0.25; 3]);
        let b = ImageBuffer::filled(16, 16, [0.75; 3]);
        let m = evaluate_texture(&[a.clone(), a.clone()], &[a.clone(), b], None, &SsimParams::default()).unwrap();
        assert_eq!(m.infinite_psnr_pairs, 1);
        assert!((m.psnr_db.value() - 6.020599913279624).abs() < 1e-9);
    }
}
