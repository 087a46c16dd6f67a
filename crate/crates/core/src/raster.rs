//! Pixel carriers: 8-bit RGB rasters and real-valued tensor images.

use crate::error::{Error, Result};

pub const CHANNELS: usize = 3;

/// A width x height RGB image with 8-bit samples, row-major, interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!("image extent {width}x{height}")));
        }
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(CHANNELS))
            .ok_or_else(|| Error::UnsupportedImage(format!("{width}x{height} overflows")))?;
        if pixels.len() != expected {
            return Err(Error::Shape(format!(
                "{width}x{height} image needs {expected} samples, got {}",
                pixels.len()
            )));
        }
        Ok(RasterImage {
            width,
            height,
            pixels,
        })
    }

    /// An all-black image.
    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0; width * height * CHANNELS])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    /// Copies the `width x height` rectangle at `(x, y)`, which must lie
    /// inside the image.
    pub fn crop(&self, x: usize, y: usize, width: usize, height: usize) -> Result<RasterImage> {
        if width == 0 || height == 0 || x + width > self.width || y + height > self.height {
            return Err(Error::OutOfBounds {
                x,
                y,
                width: self.width,
                height: self.height,
            });
        }
        let mut pixels = Vec::with_capacity(width * height * CHANNELS);
        for row in y..y + height {
            let s = (row * self.width + x) * CHANNELS;
            pixels.extend_from_slice(&self.pixels[s..s + width * CHANNELS]);
        }
        RasterImage::new(width, height, pixels)
    }

    /// Expands a single-channel buffer by replicating it across RGB.
    pub fn from_gray(width: usize, height: usize, gray: &[u8]) -> Result<Self> {
        let pixels = gray.iter().flat_map(|&g| [g, g, g]).collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * CHANNELS;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * CHANNELS;
        self.pixels[i..i + CHANNELS].copy_from_slice(&rgb);
    }
}

/// Real-valued image with the same layout as [`RasterImage`] (HWC,
/// row-major). Values are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorImage {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl TensorImage {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height * CHANNELS {
            return Err(Error::Shape(format!(
                "{width}x{height} tensor image with {} values",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Range("tensor image holds a non-finite value".into()));
        }
        Ok(TensorImage {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, x: usize, y: usize, channel: usize) -> f64 {
        self.values[(y * self.width + x) * CHANNELS + channel]
    }

    /// Planar channel-major copy (C, H, W), the layout the network consumes.
    pub fn to_planar(&self) -> Vec<f64> {
        let plane = self.width * self.height;
        let mut out = vec![0.0; plane * CHANNELS];
        for (i, px) in self.values.chunks_exact(CHANNELS).enumerate() {
            for c in 0..CHANNELS {
                out[c * plane + i] = px[c];
            }
        }
        out
    }

    pub(crate) fn map_pixels(&self, mut f: impl FnMut([f64; 3]) -> [f64; 3]) -> TensorImage {
        let mut values = Vec::with_capacity(self.values.len());
        for px in self.values.chunks_exact(CHANNELS) {
            values.extend_from_slice(&f([px[0], px[1], px[2]]));
        }
        TensorImage {
            width: self.width,
            height: self.height,
            values,
        }
    }

    /// Rearranges pixels: output pixel `(x, y)` of a `width x height` result
    /// is taken from source pixel `source(x, y)`.
    pub(crate) fn remap(
        &self,
        width: usize,
        height: usize,
        source: impl Fn(usize, usize) -> (usize, usize),
    ) -> TensorImage {
        let mut values = Vec::with_capacity(self.values.len());
        for y in 0..height {
            for x in 0..width {
                let (sx, sy) = source(x, y);
                let i = (sy * self.width + sx) * CHANNELS;
                values.extend_from_slice(&self.values[i..i + CHANNELS]);
            }
        }
        TensorImage {
            width,
            height,
            values,
        }
    }
}
