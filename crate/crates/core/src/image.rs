//! RGB raster container plus the two on-disk raster formats: binary PPM (P6)
//! for images and the `DPTH` little-endian f32 raster for depth maps.

use crate::camera::DepthMap;
use std::io::{self, Read, Write};

/// Dense H×W RGB image with channel values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRgb {
    width: usize,
    height: usize,
    /// Row-major, 3 values per pixel.
    data: Vec<f64>,
}

impl ImageRgb {
    /// Solid-color image.
    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self { width, height, data }
    }

    /// Build from a per-pixel function of `(u, v)` pixel indices.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for v in 0..height {
            for u in 0..width {
                data.extend_from_slice(&f(u, v));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel(&self, u: usize, v: usize) -> [f64; 3] {
        debug_assert!(u < self.width && v < self.height);
        let i = (v * self.width + u) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, u: usize, v: usize, rgb: [f64; 3]) {
        debug_assert!(u < self.width && v < self.height);
        let i = (v * self.width + u) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Flat channel data, row-major, 3 per pixel.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Bilinear sample at continuous pixel coordinates, clamping the
    /// neighborhood to the image border. Callers decide what "out of
    /// bounds" means; this only interpolates.
    pub fn sample_bilinear(&self, u: f64, v: f64) -> [f64; 3] {
        let u = u.clamp(0.0, (self.width - 1) as f64);
        let v = v.clamp(0.0, (self.height - 1) as f64);
        let u0 = u.floor();
        let v0 = v.floor();
        let fu = u - u0;
        let fv = v - v0;
        let x0 = u0 as usize;
        let y0 = v0 as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let p00 = self.pixel(x0, y0);
        let p10 = self.pixel(x1, y0);
        let p01 = self.pixel(x0, y1);
        let p11 = self.pixel(x1, y1);
        let mut out = [0.0; 3];
        for c in 0..3 {
            out[c] = p00[c] * (1.0 - fu) * (1.0 - fv)
                + p10[c] * fu * (1.0 - fv)
                + p01[c] * (1.0 - fu) * fv
                + p11[c] * fu * fv;
        }
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RasterError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    Format(String),
}

/// Write a binary PPM (P6, maxval 255). Values are clamped to `[0, 1]` and
/// quantized with round-half-up so the u8 round trip is exact.
pub fn write_ppm(image: &ImageRgb, mut w: impl Write) -> Result<(), RasterError> {
    write!(w, "P6\n{} {}\n255\n", image.width, image.height)?;
    let mut bytes = Vec::with_capacity(image.width * image.height * 3);
    for v in &image.data {
        bytes.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
    }
    w.write_all(&bytes)?;
    Ok(())
}

/// Read a binary PPM (P6). Channel values come back as `v / 255`.
pub fn read_ppm(mut r: impl Read) -> Result<ImageRgb, RasterError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let mut pos = 0usize;

    fn token(buf: &[u8], pos: &mut usize) -> Result<String, RasterError> {
        // skip whitespace and '#' comments
        loop {
            while *pos < buf.len() && buf[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < buf.len() && buf[*pos] == b'#' {
                while *pos < buf.len() && buf[*pos] != b'\n' {
                    *pos += 1;
                }
            } else {
                break;
            }
        }
        let start = *pos;
        while *pos < buf.len() && !buf[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(RasterError::Format("unexpected end of PPM header".into()));
        }
        Ok(String::from_utf8_lossy(&buf[start..*pos]).into_owned())
    }

    let magic = token(&buf, &mut pos)?;
    if magic != "P6" {
        return Err(RasterError::Format(format!("expected P6 magic, got {magic:?}")));
    }
    let width: usize = token(&buf, &mut pos)?
        .parse()
        .map_err(|_| RasterError::Format("bad PPM width".into()))?;
    let height: usize = token(&buf, &mut pos)?
        .parse()
        .map_err(|_| RasterError::Format("bad PPM height".into()))?;
    let maxval: usize = token(&buf, &mut pos)?
        .parse()
        .map_err(|_| RasterError::Format("bad PPM maxval".into()))?;
    if maxval != 255 {
        return Err(RasterError::Format(format!("unsupported PPM maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let need = width * height * 3;
    if buf.len() < pos + need {
        return Err(RasterError::Format("truncated PPM raster".into()));
    }
    let data = buf[pos..pos + need].iter().map(|&b| b as f64 / 255.0).collect();
    Ok(ImageRgb { width, height, data })
}

/// Write the `DPTH` depth raster: 8-byte header (magic `DPTH`, u16 W, u16 H,
/// little-endian) followed by row-major little-endian f32 depths. Invalid
/// pixels are stored as 0.0.
pub fn write_depth_raster(depth: &DepthMap, mut w: impl Write) -> Result<(), RasterError> {
    let (width, height) = (depth.width(), depth.height());
    if width > u16::MAX as usize || height > u16::MAX as usize {
        return Err(RasterError::Format("depth raster dimensions exceed u16".into()));
    }
    w.write_all(b"DPTH")?;
    w.write_all(&(width as u16).to_le_bytes())?;
    w.write_all(&(height as u16).to_le_bytes())?;
    let mut bytes = Vec::with_capacity(width * height * 4);
    for v in 0..height {
        for u in 0..width {
            let d = if depth.is_valid(u, v) { depth.get(u, v) as f32 } else { 0.0f32 };
            bytes.extend_from_slice(&d.to_le_bytes());
        }
    }
    w.write_all(&bytes)?;
    Ok(())
}

/// Read a `DPTH` raster back into a [`DepthMap`] with the given valid range.
/// Stored values outside `[d_min, d_max]` (such as the 0.0 invalid marker)
/// stay invalid.
pub fn read_depth_raster(mut r: impl Read, d_min: f64, d_max: f64) -> Result<DepthMap, RasterError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() < 8 || &buf[0..4] != b"DPTH" {
        return Err(RasterError::Format("missing DPTH magic".into()));
    }
    let width = u16::from_le_bytes([buf[4], buf[5]]) as usize;
    let height = u16::from_le_bytes([buf[6], buf[7]]) as usize;
    let need = 8 + width * height * 4;
    if buf.len() < need {
        return Err(RasterError::Format("truncated depth raster".into()));
    }
    let mut values = Vec::with_capacity(width * height);
    for i in 0..width * height {
        let o = 8 + i * 4;
        let d = f32::from_le_bytes([buf[o], buf[o + 1], buf[o + 2], buf[o + 3]]) as f64;
        values.push(d);
    }
    DepthMap::new(width, height, values, d_min, d_max)
        .map_err(|e| RasterError::Format(e.to_string()))
}
