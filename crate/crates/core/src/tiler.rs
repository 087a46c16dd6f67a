//! Patch-size estimation and overlapping tiling of whole-slide images.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::CropRecord;
use crate::random::RandomStream;
use crate::raster::{RasterImage, CHANNELS};

/// Default fraction of each patch shared with its neighbour.
pub const DEFAULT_OVERLAP: f64 = 1.0 / 3.0;

/// Default fraction of crops sampled when estimating the patch size.
pub const DEFAULT_SUBSET_FRACTION: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PatchSpec {
    pub patch_width: usize,
    pub patch_height: usize,
    pub overlap_fraction: f64,
}

impl PatchSpec {
    pub fn new(patch_width: usize, patch_height: usize, overlap_fraction: f64) -> Result<Self> {
        if patch_width == 0 || patch_height == 0 {
            return Err(Error::Range(format!(
                "patch extent {patch_width}x{patch_height} must be positive"
            )));
        }
        if !(0.0..1.0).contains(&overlap_fraction) {
            return Err(Error::Range(format!(
                "overlap fraction {overlap_fraction} must lie in [0, 1)"
            )));
        }
        Ok(PatchSpec {
            patch_width,
            patch_height,
            overlap_fraction,
        })
    }

    pub fn square(extent: usize) -> Result<Self> {
        Self::new(extent, extent, DEFAULT_OVERLAP)
    }

    pub fn stride_x(&self) -> usize {
        stride(self.patch_width, self.overlap_fraction)
    }

    pub fn stride_y(&self) -> usize {
        stride(self.patch_height, self.overlap_fraction)
    }
}

/// `max(1, floor(extent * (1 - overlap)))`. Flooring keeps the realised
/// overlap at or above the requested fraction.
pub fn stride(extent: usize, overlap_fraction: f64) -> usize {
    // 1e-9 absorbs products like 60 * (1 - 1/3) landing just under 40.
    let raw = (extent as f64 * (1.0 - overlap_fraction) + 1e-9).floor() as usize;
    raw.max(1)
}

/// Top-left corner of a patch in slide coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PatchOrigin {
    pub x: usize,
    pub y: usize,
}

impl PatchOrigin {
    /// The `x_y` identifier used for patch predictions.
    pub fn patch_id(&self) -> String {
        format!("{}_{}", self.x, self.y)
    }
}

/// Lower median of a non-empty slice.
pub(crate) fn lower_median(values: &mut [usize]) -> usize {
    values.sort_unstable();
    values[(values.len() - 1) / 2]
}

/// Element-wise lower median of `(width, height)` pairs over a random subset
/// of `ceil(n * fraction)` entries drawn without replacement.
pub fn median_dims_of_subset(
    dims: &[(usize, usize)],
    subset_fraction: f64,
    rng: &mut RandomStream,
) -> Result<(usize, usize)> {
    if dims.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(subset_fraction > 0.0 && subset_fraction <= 1.0) {
        return Err(Error::Range(format!(
            "subset fraction {subset_fraction} must lie in (0, 1]"
        )));
    }
    let n = dims.len();
    let take = ((n as f64 * subset_fraction - 1e-9).ceil() as usize).clamp(1, n);
    let picks = rng.sample_indices(n, take);
    let mut widths: Vec<usize> = picks.iter().map(|&i| dims[i].0).collect();
    let mut heights: Vec<usize> = picks.iter().map(|&i| dims[i].1).collect();
    Ok((lower_median(&mut widths), lower_median(&mut heights)))
}

/// Working patch size: the median crop size over a random subset.
pub fn estimate_patch_size(
    crops: &[CropRecord],
    subset_fraction: f64,
    rng: &mut RandomStream,
) -> Result<(usize, usize)> {
    let dims: Vec<_> = crops
        .iter()
        .map(|c| (c.bounds.width, c.bounds.height))
        .collect();
    median_dims_of_subset(&dims, subset_fraction, rng)
}

fn axis_origins(image_extent: usize, patch_extent: usize, stride: usize) -> Vec<usize> {
    if image_extent <= patch_extent {
        return vec![0];
    }
    let last = image_extent - patch_extent;
    let mut origins: Vec<usize> = (0..=last).step_by(stride).collect();
    if origins.last() != Some(&last) {
        origins.push(last);
    }
    origins
}

/// Overlapping grid of patch origins covering every pixel, sorted by
/// `(y, x)`.
pub fn tile(image_width: usize, image_height: usize, spec: &PatchSpec) -> Vec<PatchOrigin> {
    let xs = axis_origins(image_width, spec.patch_width, spec.stride_x());
    let ys = axis_origins(image_height, spec.patch_height, spec.stride_y());
    ys.iter()
        .flat_map(|&y| xs.iter().map(move |&x| PatchOrigin { x, y }))
        .collect()
}

/// Copies the patch at `origin`; pixels beyond the source are black.
pub fn extract(image: &RasterImage, origin: PatchOrigin, spec: &PatchSpec) -> Result<RasterImage> {
    let (w, h) = image.dimensions();
    if origin.x >= w || origin.y >= h {
        return Err(Error::OutOfBounds {
            x: origin.x,
            y: origin.y,
            width: w,
            height: h,
        });
    }
    let (pw, ph) = (spec.patch_width, spec.patch_height);
    let mut pixels = vec![0u8; pw * ph * CHANNELS];
    let copy_w = pw.min(w - origin.x);
    let copy_h = ph.min(h - origin.y);
    let src = image.pixels();
    for row in 0..copy_h {
        let s = ((origin.y + row) * w + origin.x) * CHANNELS;
        let d = row * pw * CHANNELS;
        pixels[d..d + copy_w * CHANNELS].copy_from_slice(&src[s..s + copy_w * CHANNELS]);
    }
    RasterImage::new(pw, ph, pixels)
}

/// Renders origins as the `patch_id x y width height` TSV table.
pub fn format_tiles(origins: &[PatchOrigin], spec: &PatchSpec) -> String {
    let mut out = String::from("patch_id\tx\ty\twidth\theight\n");
    for o in origins {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            o.patch_id(),
            o.x,
            o.y,
            spec.patch_width,
            spec.patch_height
        ));
    }
    out
}
