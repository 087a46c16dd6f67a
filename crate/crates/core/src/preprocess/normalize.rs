use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{RasterImage, TensorImage, CHANNELS};

/// Lower bound applied to a channel's standard deviation before dividing.
pub const STD_EPSILON: f64 = 1e-6;

/// Per-channel mean and population standard deviation, in intensity units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl NormalizationStats {
    /// Divisor for channel `c`: `max(std_c, STD_EPSILON)`.
    pub fn divisor(&self, c: usize) -> f64 {
        self.std[c].max(STD_EPSILON)
    }
}

pub fn compute_stats<'a>(images: impl IntoIterator<Item = &'a RasterImage>) -> Result<NormalizationStats> {
    let mut count = 0u64;
    let mut sum = [0.0f64; 3];
    let mut sum_sq = [0.0f64; 3];
    for img in images {
        for px in img.pixels().chunks_exact(CHANNELS) {
            for c in 0..CHANNELS {
                let v = f64::from(px[c]);
                sum[c] += v;
                sum_sq[c] += v * v;
            }
        }
        count += (img.width() * img.height()) as u64;
    }
    if count == 0 {
        return Err(Error::EmptyDataset);
    }
    let n = count as f64;
    let mean = sum.map(|s| s / n);
    let std = std::array::from_fn(|c| (sum_sq[c] / n - mean[c] * mean[c]).max(0.0).sqrt());
    Ok(NormalizationStats { mean, std })
}

pub fn normalize(image: &RasterImage, stats: &NormalizationStats) -> TensorImage {
    let div = [stats.divisor(0), stats.divisor(1), stats.divisor(2)];
    let values = image
        .pixels()
        .chunks_exact(CHANNELS)
        .flat_map(|px| (0..CHANNELS).map(move |c| (f64::from(px[c]) - stats.mean[c]) / div[c]))
        .collect();
    TensorImage::new(image.width(), image.height(), values)
        .expect("normalizing a valid raster yields finite values")
}

/// Inverse of [`normalize`] before rounding: `x * divisor + mean`.
pub fn denormalize(image: &TensorImage, stats: &NormalizationStats) -> Vec<f64> {
    image
        .values()
        .chunks_exact(CHANNELS)
        .flat_map(|px| (0..CHANNELS).map(move |c| px[c] * stats.divisor(c) + stats.mean[c]))
        .collect()
}
