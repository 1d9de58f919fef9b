//! Text-query object selection and silhouette padding.
//!
//! The query is matched against scene object names; the selected object's
//! rendered silhouette is dilated with a square structuring element and used
//! to crop the RGB view.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::render::{BinaryMask, ImageBuffer, RenderOutput, Scene};

pub const DEFAULT_PADDING_PX: usize = 50;

#[derive(Debug, Error, PartialEq)]
pub enum SegmentError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("object not found for query '{0}'")]
    NotFound(String),
    #[error("ambiguous query '{query}': matches {candidates:?}")]
    Ambiguous { query: String, candidates: Vec<String> },
    #[error("view {0} has no mask for object '{1}'")]
    MissingMask(usize, String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Query {
    text: String,
}

impl Query {
    pub fn new(text: &str) -> Result<Self, SegmentError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(SegmentError::EmptyQuery);
        }
        Ok(Self { text: text.to_string() })
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

/// The unique object whose name contains the query, case-insensitively.
pub fn resolve_query(scene: &Scene, query: &Query) -> Result<String, SegmentError> {
    resolve_name(scene.objects.iter().map(|o| o.name.as_str()), query)
}

/// [`resolve_query`] over a bare list of object names.
pub fn resolve_name<'a>(names: impl IntoIterator<Item = &'a str>, query: &Query) -> Result<String, SegmentError> {
    let needle = query.text.to_lowercase();
    let candidates: Vec<String> =
        names.into_iter().filter(|n| n.to_lowercase().contains(&needle)).map(str::to_string).collect();
    match candidates.len() {
        0 => Err(SegmentError::NotFound(query.text.clone())),
        1 => Ok(candidates.into_iter().next().expect("one candidate")),
        _ => Err(SegmentError::Ambiguous { query: query.text.clone(), candidates }),
    }
}

/// Chebyshev dilation: a pixel is set iff some set input pixel lies within
/// `padding_px` in both x and y. Separable running-window max, clipped at the
/// image border.
pub fn pad_mask(mask: &BinaryMask, padding_px: usize) -> BinaryMask {
    if padding_px == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width, mask.height);
    let horizontal = dilate_lines(&mask.bits, w, h, padding_px, |x, y| y * w + x);
    let vertical = dilate_lines(&horizontal, h, w, padding_px, |y, x| y * w + x);
    BinaryMask { width: w, height: h, bits: vertical }
}

/// Dilates each line of length `len` (there are `lines` of them); `at(i, line)`
/// maps a position along a line to a flat index.
fn dilate_lines(bits: &[bool], len: usize, lines: usize, r: usize, at: impl Fn(usize, usize) -> usize) -> Vec<bool> {
    let mut out = vec![false; bits.len()];
    let mut prefix = vec![0usize; len + 1];
    for line in 0..lines {
        for i in 0..len {
            prefix[i + 1] = prefix[i] + usize::from(bits[at(i, line)]);
        }
        for i in 0..len {
            let lo = i.saturating_sub(r);
            let hi = (i + r + 1).min(len);
            out[at(i, line)] = prefix[hi] > prefix[lo];
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaskedView {
    /// RGB with everything outside `padded_mask` set to black.
    pub rgb_masked: ImageBuffer,
    pub padded_mask: BinaryMask,
    pub raw_mask: BinaryMask,
    pub camera_index: usize,
    /// The target covers no pixel in this view.
    pub target_empty: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentationSummary {
    pub query: String,
    pub object: String,
    pub padding_px: usize,
    pub empty_views: Vec<bool>,
}

pub fn segment_views(
    scene: &Scene,
    renders: &[RenderOutput],
    query: &Query,
    padding_px: usize,
) -> Result<(Vec<MaskedView>, SegmentationSummary), SegmentError> {
    let object = resolve_query(scene, query)?;
    let views = renders
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let raw = r.masks.get(&object).ok_or_else(|| SegmentError::MissingMask(i, object.clone()))?;
            Ok(mask_view(&r.rgb, raw, padding_px, i))
        })
        .collect::<Result<Vec<_>, SegmentError>>()?;
    let summary = SegmentationSummary {
        query: query.text.clone(),
        object,
        padding_px,
        empty_views: views.iter().map(|v| v.target_empty).collect(),
    };
    Ok((views, summary))
}

/// Pads `raw` and blacks out the RGB outside the padded silhouette.
pub fn mask_view(rgb: &ImageBuffer, raw: &BinaryMask, padding_px: usize, camera_index: usize) -> MaskedView {
    let padded = pad_mask(raw, padding_px);
    let mut rgb_masked = rgb.clone();
    for (i, &keep) in padded.bits.iter().enumerate() {
        if !keep {
            let c = rgb.channels;
            rgb_masked.data[i * c..(i + 1) * c].fill(0.0);
        }
    }
    MaskedView { rgb_masked, padded_mask: padded, raw_mask: raw.clone(), camera_index, target_empty: raw.is_empty() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{generate_rig, RigSpec};
    use crate::geometry::Vec3;
    use crate::harness::scenes;
    use crate::render::{render_rig, SceneObject};
    use proptest::prelude::*;

    fn scene(names: &[&str]) -> Scene {
        let objects = names
            .iter()
            .enumerate()
            .map(|(i, n)| SceneObject {
                name: n.to_string(),
                mesh: scenes::cube(0.3).map_vertices(|v| v + Vec3::new(i as f64 * 0.5 - 0.25, 0.0, 0.0)),
            })
            .collect();
        Scene::new(objects, [0.0; 3]).unwrap()
    }

    #[test]
    fn query_resolution() {
        let s = scene(&["cat", "dog"]);
        assert_eq!(resolve_query(&s, &Query::new("cat").unwrap()).unwrap(), "cat");
        assert_eq!(resolve_query(&s, &Query::new("  DOG ").unwrap()).unwrap(), "dog");
        assert_eq!(resolve_query(&s, &Query::new("bird").unwrap()), Err(SegmentError::NotFound("bird".into())));
        let s = scene(&["cat_small", "cat_large"]);
        assert_eq!(
            resolve_query(&s, &Query::new("cat").unwrap()),
            Err(SegmentError::Ambiguous { query: "cat".into(), candidates: vec!["cat_small".into(), "cat_large".into()] })
        );
        assert_eq!(Query::new("   "), Err(SegmentError::EmptyQuery));
    }

    #[test]
    fn padding_zero_is_identity() {
        let mut m = BinaryMask::new(30, 20);
        m.set(4, 5, true);
        assert_eq!(pad_mask(&m, 0), m);
    }

    #[test]
    fn single_pixel_becomes_square() {
        let mut m = BinaryMask::new(256, 256);
        m.set(100, 100, true);
        let p = pad_mask(&m, 50);
        assert_eq!(p.count(), 101 * 101);
        assert!(p.get(50, 50) && p.get(150, 150) && !p.get(49, 100) && !p.get(100, 151));
    }

    #[test]
    fn border_clipping() {
        let mut m = BinaryMask::new(64, 48);
        m.set(0, 47, true);
        let p = pad_mask(&m, 50);
        assert_eq!(p.count(), 51 * 48);
    }

    fn brute_pad(m: &BinaryMask, r: usize) -> BinaryMask {
        let mut out = BinaryMask::new(m.width, m.height);
        for y in 0..m.height {
            for x in 0..m.width {
                let mut hit = false;
                for yy in 0..m.height {
                    for xx in 0..m.width {
                        if m.get(xx, yy) && x.abs_diff(xx) <= r && y.abs_diff(yy) <= r {
                            hit = true;
                        }
                    }
                }
                out.set(x, y, hit);
            }
        }
        out
    }

    fn arb_mask() -> impl Strategy<Value = BinaryMask> {
        (4usize..24, 4usize..24).prop_flat_map(|(w, h)| {
            prop::collection::vec(prop::bool::weighted(0.08), w * h)
                .prop_map(move |bits| BinaryMask { width: w, height: h, bits })
        })
    }

    proptest! {
        #[test]
        fn matches_brute_force(m in arb_mask()) {
            prop_assert_eq!(pad_mask(&m, 7), brute_pad(&m, 7));
        }

        #[test]
        fn dilation_laws(m in arb_mask(), extra in arb_mask(), a in 0usize..5, b in 0usize..5) {
            let p = pad_mask(&m, a);
            prop_assert!(m.is_subset_of(&p));
            prop_assert_eq!(pad_mask(&p, b), pad_mask(&m, a + b));
            if extra.width == m.width && extra.height == m.height {
                let union = BinaryMask {
                    width: m.width,
                    height: m.height,
                    bits: m.bits.iter().zip(&extra.bits).map(|(x, y)| *x || *y).collect(),
                };
                prop_assert!(p.is_subset_of(&pad_mask(&union, a)));
            }
        }
    }

    #[test]
    fn segment_views_crops_distractor() {
        let s = scene(&["cat", "dog"]);
        let cams: Vec<_> = generate_rig(&RigSpec::ring(60.0, 30.0, 12)).unwrap().into_iter().map(|r| r.camera).collect();
        let renders = render_rig(&s, &cams).unwrap();
        let (views, summary) = segment_views(&s, &renders, &Query::new("cat").unwrap(), 5).unwrap();
        assert_eq!(views.len(), 12);
        assert_eq!(summary.object, "cat");
        for (v, r) in views.iter().zip(&renders) {
            assert!(v.raw_mask.is_subset_of(&v.padded_mask));
            for i in 0..v.raw_mask.bits.len() {
                let orig = &r.rgb.data[i * 3..i * 3 + 3];
                let masked = &v.rgb_masked.data[i * 3..i * 3 + 3];
                if v.raw_mask.bits[i] {
                    assert_eq!(orig, masked);
                }
                if r.masks["dog"].bits[i] && !v.padded_mask.bits[i] {
                    assert_eq!(masked, &[0.0, 0.0, 0.0]);
                }
            }
        }
        assert!(views.iter().any(|v| renders[v.camera_index].masks["dog"]
            .bits
            .iter()
            .zip(&v.padded_mask.bits)
            .any(|(d, p)| *d && !*p)));
    }

    #[test]
    fn empty_target_views_flagged() {
        let s = scene(&["cat"]);
        let mut r = render_rig(&s, &[generate_rig(&RigSpec::ring(60.0, 30.0, 1)).unwrap()[0].camera]).unwrap();
        r[0].masks.insert("cat".into(), BinaryMask::new(256, 256));
        let (views, summary) = segment_views(&s, &r, &Query::new("cat").unwrap(), 50).unwrap();
        assert!(views[0].target_empty);
        assert_eq!(summary.empty_views, vec![true]);
    }
}
