use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::MetricsError;
use crate::render::ImageBuffer;

/// Peak signal-to-noise ratio in dB; identical images give `Infinite`,
/// serialized as the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Psnr {
    Finite(f64),
    Infinite,
}

impl Psnr {
    pub fn value(self) -> f64 {
        match self {
            Psnr::Finite(v) => v,
            Psnr::Infinite => f64::INFINITY,
        }
    }
}

impl Serialize for Psnr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Psnr::Finite(v) => s.serialize_f64(*v),
            Psnr::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Psnr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Psnr;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Psnr, E> {
                Ok(Psnr::Finite(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Psnr, E> {
                Ok(Psnr::Finite(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Psnr, E> {
                Ok(Psnr::Finite(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Psnr, E> {
                if v == "inf" {
                    Ok(Psnr::Infinite)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(V)
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self {
            Psnr::Finite(v) => write!(f, "{v}"),
            Psnr::Infinite => f.write_str("inf"),
        }
    }
}

fn check_shapes(x: &ImageBuffer, y: &ImageBuffer) -> Result<(), MetricsError> {
    if x.same_shape(y) {
        Ok(())
    } else {
        Err(MetricsError::ShapeMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            x.width, x.height, x.channels, y.width, y.height, y.channels
        )))
    }
}

pub fn psnr(x: &ImageBuffer, y: &ImageBuffer) -> Result<Psnr, MetricsError> {
    check_shapes(x, y)?;
    let mse = x.data.iter().zip(&y.data).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.data.len() as f64;
    Ok(if mse == 0.0 { Psnr::Infinite } else { Psnr::Finite(10.0 * (1.0 / mse).log10()) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self { window: 11, sigma: 1.5, k1: 0.01, k2: 0.03, dynamic_range: 1.0 }
    }
}

impl SsimParams {
    /// Normalized 1-D Gaussian; the 2-D window is its outer product.
    pub fn kernel(&self) -> Vec<f64> {
        let c = (self.window as f64 - 1.0) / 2.0;
        let w: Vec<f64> = (0..self.window).map(|i| (-((i as f64 - c).powi(2)) / (2.0 * self.sigma * self.sigma)).exp()).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    }
}

// Separable "valid" correlation of a w×h plane with the kernel.
fn filter_valid(plane: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (ow, oh) = (w - n + 1, h - n + 1);
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            tmp[y * ow + x] = k.iter().zip(&row[x..x + n]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|i| k[i] * tmp[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Per-position SSIM over every full window, row-major `(w-n+1)×(h-n+1)`.
pub fn ssim_map(x: &ImageBuffer, y: &ImageBuffer, params: &SsimParams) -> Result<Vec<f64>, MetricsError> {
    check_shapes(x, y)?;
    let n = params.window;
    if n == 0 || x.width < n || x.height < n {
        return Err(MetricsError::ImageTooSmall { width: x.width, height: x.height, window: n });
    }
    let (w, h) = (x.width, x.height);
    let gx = x.to_gray();
    let gy = y.to_gray();
    let k = params.kernel();
    let prod = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).collect::<Vec<f64>>();
    let mx = filter_valid(&gx, w, h, &k);
    let my = filter_valid(&gy, w, h, &k);
    let mxx = filter_valid(&prod(&gx, &gx), w, h, &k);
    let myy = filter_valid(&prod(&gy, &gy), w, h, &k);
    let mxy = filter_valid(&prod(&gx, &gy), w, h, &k);
    let c1 = (params.k1 * params.dynamic_range).powi(2);
    let c2 = (params.k2 * params.dynamic_range).powi(2);
    Ok((0..mx.len())
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = mxx[i] - ux * ux;
            let vy = myy[i] - uy * uy;
            let cxy = mxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .collect())
}

/// Mean SSIM over valid window positions, on luma for RGB inputs.
pub fn ssim(x: &ImageBuffer, y: &ImageBuffer, params: &SsimParams) -> Result<f64, MetricsError> {
    let map = ssim_map(x, y, params)?;
    Ok(map.iter().sum::<f64>() / map.len() as f64)
}
