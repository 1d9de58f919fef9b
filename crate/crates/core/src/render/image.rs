//! Raster containers and their PPM/PGM encodings.

use std::fs;
use std::path::Path;

use super::RenderError;

/// Row-major image with 1 or 3 channels, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self { width, height, channels, data: vec![0.0; width * height * channels] }
    }

    pub fn from_data(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self, RenderError> {
        if channels != 1 && channels != 3 {
            return Err(RenderError::Image(format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(RenderError::Image(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(RenderError::Image("pixel values must lie in [0, 1]".into()));
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn filled(width: usize, height: usize, color: [f64; 3]) -> Self {
        let mut img = Self::new(width, height, 3);
        for px in img.data.chunks_exact_mut(3) {
            px.copy_from_slice(&color);
        }
        img
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    pub fn same_shape(&self, other: &ImageBuffer) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Luma plane (0.299 R + 0.587 G + 0.114 B) or a copy for 1-channel images.
    pub fn to_gray(&self) -> Vec<f64> {
        match self.channels {
            1 => self.data.clone(),
            _ => self.data.chunks_exact(3).map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).collect(),
        }
    }

    fn quantized(&self) -> Vec<u8> {
        self.data.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect()
    }

    /// Binary PPM (3 channels) or PGM (1 channel), maxval 255.
    pub fn encode_pnm(&self) -> Vec<u8> {
        let magic = if self.channels == 3 { "P6" } else { "P5" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.quantized());
        out
    }

    pub fn decode_pnm(bytes: &[u8]) -> Result<Self, RenderError> {
        let (magic, width, height, maxval, body) = parse_pnm_header(bytes)?;
        let channels = match magic.as_str() {
            "P6" => 3,
            "P5" => 1,
            other => return Err(RenderError::Image(format!("unsupported PNM type {other}"))),
        };
        if maxval != 255 {
            return Err(RenderError::Image(format!("unsupported maxval {maxval}")));
        }
        let n = width * height * channels;
        if body.len() < n {
            return Err(RenderError::Image("truncated PNM data".into()));
        }
        let data = body[..n].iter().map(|&b| b as f64 / 255.0).collect();
        Ok(Self { width, height, channels, data })
    }

    pub fn write(&self, path: &Path) -> Result<(), RenderError> {
        write_bytes(path, &self.encode_pnm())
    }

    pub fn read(path: &Path) -> Result<Self, RenderError> {
        let bytes = fs::read(path).map_err(|e| RenderError::Io(path.display().to_string(), e))?;
        Self::decode_pnm(&bytes)
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), RenderError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| RenderError::Io(dir.display().to_string(), e))?;
    }
    fs::write(path, bytes).map_err(|e| RenderError::Io(path.display().to_string(), e))
}

fn parse_pnm_header(bytes: &[u8]) -> Result<(String, usize, usize, usize, &[u8]), RenderError> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(RenderError::Image("truncated PNM header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let num = |s: &str| s.parse::<usize>().map_err(|_| RenderError::Image(format!("bad PNM header field '{s}'")));
    Ok((fields[0].clone(), num(&fields[1])?, num(&fields[2])?, num(&fields[3])?, bytes.get(pos..).unwrap_or(&[])))
}

/// Row-major boolean raster.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn to_image(&self) -> ImageBuffer {
        ImageBuffer {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    /// Pixels at or above mid-gray are set.
    pub fn from_image(img: &ImageBuffer) -> Self {
        let gray = img.to_gray();
        Self { width: img.width, height: img.height, bits: gray.iter().map(|&v| v >= 0.5).collect() }
    }

    pub fn write(&self, path: &Path) -> Result<(), RenderError> {
        self.to_image().write(path)
    }

    pub fn read(path: &Path) -> Result<Self, RenderError> {
        Ok(Self::from_image(&ImageBuffer::read(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pnm_roundtrip_quantizes() {
        let mut img = ImageBuffer::new(3, 2, 3);
        for (i, v) in img.data.iter_mut().enumerate() {
            *v = i as f64 / 17.0;
        }
        let back = ImageBuffer::decode_pnm(&img.encode_pnm()).unwrap();
        assert!(back.same_shape(&img));
        for (a, b) in img.data.iter().zip(&back.data) {
            assert_eq!((a * 255.0).round() / 255.0, *b);
        }
        assert!(img.encode_pnm().starts_with(b"P6\n3 2\n255\n"));
    }

    #[test]
    fn mask_pgm_roundtrip() {
        let mut m = BinaryMask::new(20, 16);
        m.set(3, 4, true);
        m.set(19, 15, true);
        let img = m.to_image();
        assert!(img.encode_pnm().starts_with(b"P5"));
        assert_eq!(BinaryMask::from_image(&ImageBuffer::decode_pnm(&img.encode_pnm()).unwrap()), m);
    }

    #[test]
    fn header_with_comment() {
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend([0u8, 255]);
        let img = ImageBuffer::decode_pnm(&bytes).unwrap();
        assert_eq!(img.data, vec![0.0, 1.0]);
    }

    #[test]
    fn rejects_out_of_range_values() {
        assert!(ImageBuffer::from_data(1, 1, 1, vec![1.5]).is_err());
        assert!(ImageBuffer::from_data(2, 1, 1, vec![0.5]).is_err());
    }
}
