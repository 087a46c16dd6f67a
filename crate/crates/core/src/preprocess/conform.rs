use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::random::RandomStream;
use crate::raster::{RasterImage, CHANNELS};
use crate::tiler::median_dims_of_subset;

/// Size every training and inference image is brought to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConformTarget {
    pub width: usize,
    pub height: usize,
}

impl ConformTarget {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Range(format!("conform target {width}x{height}")));
        }
        Ok(ConformTarget { width, height })
    }
}

/// Median dimensions over a random subset of the given image sizes.
pub fn compute_conform_target(
    dims: &[(usize, usize)],
    subset_fraction: f64,
    rng: &mut RandomStream,
) -> Result<ConformTarget> {
    let (width, height) = median_dims_of_subset(dims, subset_fraction, rng)?;
    ConformTarget::new(width, height)
}

/// Bilinear resample to `width x height` using pixel-centre alignment.
pub fn resize_bilinear(image: &RasterImage, width: usize, height: usize) -> Result<RasterImage> {
    let (sw, sh) = image.dimensions();
    if (sw, sh) == (width, height) {
        return Ok(image.clone());
    }
    let sx = sw as f64 / width as f64;
    let sy = sh as f64 / height as f64;
    let src = image.pixels();
    let mut pixels = Vec::with_capacity(width * height * CHANNELS);
    for y in 0..height {
        let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (sh - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(sh - 1);
        let ty = fy - y0 as f64;
        for x in 0..width {
            let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (sw - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(sw - 1);
            let tx = fx - x0 as f64;
            for c in 0..CHANNELS {
                let at = |xx: usize, yy: usize| f64::from(src[(yy * sw + xx) * CHANNELS + c]);
                let top = at(x0, y0) * (1.0 - tx) + at(x1, y0) * tx;
                let bottom = at(x0, y1) * (1.0 - tx) + at(x1, y1) * tx;
                let v = top * (1.0 - ty) + bottom * ty;
                pixels.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RasterImage::new(width, height, pixels)
}

/// Brings an image to exactly the target size: images larger than the
/// target along either axis are shrunk by one aspect-preserving factor,
/// then the result is placed top-left on a black canvas.
pub fn conform_size(image: &RasterImage, target: ConformTarget) -> Result<RasterImage> {
    let (w, h) = image.dimensions();
    let (tw, th) = (target.width, target.height);
    if (w, h) == (tw, th) {
        return Ok(image.clone());
    }
    let scaled = if w > tw || h > th {
        let factor = (tw as f64 / w as f64).min(th as f64 / h as f64);
        let nw = ((w as f64 * factor + 1e-9).floor() as usize).clamp(1, tw);
        let nh = ((h as f64 * factor + 1e-9).floor() as usize).clamp(1, th);
        resize_bilinear(image, nw, nh)?
    } else {
        image.clone()
    };
    let (sw, sh) = scaled.dimensions();
    let mut out = vec![0u8; tw * th * CHANNELS];
    for row in 0..sh {
        let s = row * sw * CHANNELS;
        let d = row * tw * CHANNELS;
        out[d..d + sw * CHANNELS].copy_from_slice(&scaled.pixels()[s..s + sw * CHANNELS]);
    }
    RasterImage::new(tw, th, out)
}
