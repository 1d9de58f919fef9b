//! Weighted feature distance over externally computed network activations.
//!
//! Container layout (little-endian): magic `LPIPSFS1`, `u32` layer count,
//! then per layer `i32` H, W, C, `f64` weight, H·W·C `f32` values for the
//! first image followed by H·W·C for the second.

use std::fs;
use std::path::Path;

use super::MetricsError;

const MAGIC: &[u8; 8] = b"LPIPSFS1";

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureLayer {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub weight: f64,
    /// Row-major H×W×C activations.
    pub data: Vec<f32>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureStack {
    pub layers: Vec<FeatureLayer>,
}

/// Σ_l w_l ‖F_l(x) − F_l(y)‖², squared Frobenius norm per layer.
pub fn lpips_from_features(fx: &FeatureStack, fy: &FeatureStack) -> Result<f64, MetricsError> {
    if fx.layers.len() != fy.layers.len() {
        return Err(MetricsError::ShapeMismatch(format!("{} vs {} layers", fx.layers.len(), fy.layers.len())));
    }
    let mut total = 0.0;
    for (l, (a, b)) in fx.layers.iter().zip(&fy.layers).enumerate() {
        if (a.height, a.width, a.channels) != (b.height, b.width, b.channels) || a.data.len() != b.data.len() {
            return Err(MetricsError::ShapeMismatch(format!("layer {l} shapes differ")));
        }
        if a.weight != b.weight || !(a.weight >= 0.0) {
            return Err(MetricsError::ShapeMismatch(format!("layer {l} weights differ or are negative")));
        }
        let sq: f64 = a.data.iter().zip(&b.data).map(|(p, q)| (*p as f64 - *q as f64).powi(2)).sum();
        total += a.weight * sq;
    }
    Ok(total)
}

pub fn encode_feature_pair(fx: &FeatureStack, fy: &FeatureStack) -> Result<Vec<u8>, MetricsError> {
    if fx.layers.len() != fy.layers.len() {
        return Err(MetricsError::ShapeMismatch("stacks differ in layer count".into()));
    }
    let mut out = MAGIC.to_vec();
    out.extend((fx.layers.len() as u32).to_le_bytes());
    for (a, b) in fx.layers.iter().zip(&fy.layers) {
        if a.data.len() != a.height * a.width * a.channels || b.data.len() != a.data.len() {
            return Err(MetricsError::ShapeMismatch("layer data does not match its shape".into()));
        }
        for d in [a.height, a.width, a.channels] {
            out.extend((d as i32).to_le_bytes());
        }
        out.extend(a.weight.to_le_bytes());
        for v in a.data.iter().chain(&b.data) {
            out.extend(v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_feature_pair(bytes: &[u8]) -> Result<(FeatureStack, FeatureStack), MetricsError> {
    let bad = |m: &str| MetricsError::FeatureFile(m.to_string());
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8], MetricsError> {
        let s = bytes.get(pos..pos + n).ok_or_else(|| bad("truncated"))?;
        pos += n;
        Ok(s)
    };
    if take(8)? != MAGIC {
        return Err(bad("missing LPIPSFS1 header"));
    }
    let count = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    let (mut fx, mut fy) = (FeatureStack::default(), FeatureStack::default());
    for _ in 0..count {
        let mut dims = [0usize; 3];
        for d in &mut dims {
            let v = i32::from_le_bytes(take(4)?.try_into().unwrap());
            *d = usize::try_from(v).map_err(|_| bad("negative layer dimension"))?;
        }
        let weight = f64::from_le_bytes(take(8)?.try_into().unwrap());
        let n = dims[0].checked_mul(dims[1]).and_then(|v| v.checked_mul(dims[2])).ok_or_else(|| bad("layer too large"))?;
        let mut read = || -> Result<Vec<f32>, MetricsError> {
            Ok(take(n.checked_mul(4).ok_or_else(|| bad("layer too large"))?)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect())
        };
        let (a, b) = (read()?, read()?);
        let layer = |data| FeatureLayer { height: dims[0], width: dims[1], channels: dims[2], weight, data };
        fx.layers.push(layer(a));
        fy.layers.push(layer(b));
    }
    if pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    Ok((fx, fy))
}

pub fn read_feature_pair(path: &Path) -> Result<(FeatureStack, FeatureStack), MetricsError> {
    let bytes = fs::read(path).map_err(|e| MetricsError::Io(path.display().to_string(), e))?;
    decode_feature_pair(&bytes)
}

pub fn write_feature_pair(fx: &FeatureStack, fy: &FeatureStack, path: &Path) -> Result<(), MetricsError> {
    fs::write(path, encode_feature_pair(fx, fy)?).map_err(|e| MetricsError::Io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn layer(dims: (usize, usize, usize), weight: f64, data: Vec<f32>) -> FeatureLayer {
        FeatureLayer { height: dims.0, width: dims.1, channels: dims.2, weight, data }
    }

    #[test]
    fn fixtures() {
        let a = FeatureStack { layers: vec![layer((1, 2, 2), 1.0, vec![0.0, 1.0, 2.0, 3.0])] };
        assert_eq!(lpips_from_features(&a, &a).unwrap(), 0.0);
        // Difference entries (1, 1, 1, 1): squared norm 4.
        let b = FeatureStack { layers: vec![layer((1, 2, 2), 1.0, vec![1.0, 2.0, 3.0, 4.0])] };
        assert_eq!(lpips_from_features(&a, &b).unwrap(), 4.0);

        // Squared norms 1 and 9 with weights 0.5 and 2.
        let x = FeatureStack { layers: vec![layer((1, 1, 1), 0.5, vec![0.0]), layer((1, 1, 2), 2.0, vec![0.0, 0.0])] };
        let y = FeatureStack { layers: vec![layer((1, 1, 1), 0.5, vec![1.0]), layer((1, 1, 2), 2.0, vec![0.0, 3.0])] };
        assert_eq!(lpips_from_features(&x, &y).unwrap(), 0.5 * 1.0 + 2.0 * 9.0);
    }

    #[test]
    fn shape_mismatch() {
        let a = FeatureStack { layers: vec![layer((1, 2, 1), 1.0, vec![0.0, 1.0])] };
        let b = FeatureStack { layers: vec![layer((2, 1, 1), 1.0, vec![0.0, 1.0])] };
        assert!(lpips_from_features(&a, &b).is_err());
        assert!(lpips_from_features(&a, &FeatureStack::default()).is_err());
    }

    #[test]
    fn file_round_trip_and_corruption() {
        let x = FeatureStack { layers: vec![layer((2, 1, 3), 0.25, vec![0.5, -1.0, 2.0, 3.5, 0.0, 1.0])] };
        let y = FeatureStack { layers: vec![layer((2, 1, 3), 0.25, vec![1.5, -1.0, 2.0, 3.5, 0.0, 0.0])] };
        let bytes = encode_feature_pair(&x, &y).unwrap();
        assert_eq!(&bytes[..8], b"LPIPSFS1");
        assert_eq!(bytes.len(), 8 + 4 + 12 + 8 + 2 * 6 * 4);
        let (rx, ry) = decode_feature_pair(&bytes).unwrap();
        assert_eq!((&rx, &ry), (&x, &y));
        assert_eq!(lpips_from_features(&rx, &ry).unwrap(), 0.25 * 2.0);
        assert!(decode_feature_pair(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_feature_pair(&bad).is_err());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        write_feature_pair(&x, &y, &path).unwrap();
        assert_eq!(read_feature_pair(&path).unwrap(), (x, y));
    }

    proptest! {
        #[test]
        fn nonnegative_zero_iff_equal(a in prop::collection::vec(-5.0f32..5.0, 6), b in prop::collection::vec(-5.0f32..5.0, 6), w in 0.01f64..3.0) {
            let x = FeatureStack { layers: vec![layer((1, 2, 3), w, a.clone())] };
            let y = FeatureStack { layers: vec![layer((1, 2, 3), w, b.clone())] };
            let d = lpips_from_features(&x, &y).unwrap();
            prop_assert!(d >= 0.0);
            prop_assert_eq!(d == 0.0, a == b);
        }
    }
}
