//! Size conformance, normalization and training-time augmentation.

mod augment;
mod conform;
mod normalize;

pub use augment::{
    augment, augment_variants, color_covariance, fit_color_pca, hflip, jitter, rotate90,
    AugmentConfig, ColorPCA, Rearrange, RotationMode,
};
pub use conform::{compute_conform_target, conform_size, resize_bilinear, ConformTarget};
pub use normalize::{compute_stats, denormalize, normalize, NormalizationStats, STD_EPSILON};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::write_atomic;
use crate::raster::{RasterImage, TensorImage};

/// Default fraction of training images sampled for the color PCA.
pub const DEFAULT_PCA_FRACTION: f64 = 0.15;

/// The `stats` document: normalization constants, color PCA and the seed
/// that chose the subsets. `eigenvectors` is row-major, row `i` being the
/// i-th principal direction. The conform target is carried along so that
/// training and inference agree on input size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsDocument {
    pub mean: [f64; 3],
    pub std: [f64; 3],
    pub eigenvalues: [f64; 3],
    pub eigenvectors: [f64; 9],
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conform: Option<ConformTarget>,
}

impl StatsDocument {
    pub fn new(
        stats: &NormalizationStats,
        pca: &ColorPCA,
        seed: u64,
        conform: Option<ConformTarget>,
    ) -> Self {
        let mut eigenvectors = [0.0; 9];
        for (i, row) in pca.eigenvectors.iter().enumerate() {
            eigenvectors[i * 3..i * 3 + 3].copy_from_slice(row);
        }
        StatsDocument {
            mean: stats.mean,
            std: stats.std,
            eigenvalues: pca.eigenvalues,
            eigenvectors,
            seed,
            conform,
        }
    }

    pub fn stats(&self) -> NormalizationStats {
        NormalizationStats {
            mean: self.mean,
            std: self.std,
        }
    }

    pub fn pca(&self) -> ColorPCA {
        ColorPCA {
            eigenvalues: self.eigenvalues,
            eigenvectors: std::array::from_fn(|i| {
                [self.eigenvectors[i * 3], self.eigenvectors[i * 3 + 1], self.eigenvectors[i * 3 + 2]]
            }),
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("stats serialize");
        text.push('\n');
        text
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_json().as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Inference-time preparation: conform, then normalize. No augmentation.
pub fn prepare(
    image: &RasterImage,
    target: ConformTarget,
    stats: &NormalizationStats,
) -> Result<TensorImage> {
    Ok(normalize(&conform_size(image, target)?, stats))
}
