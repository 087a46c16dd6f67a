//! Color PCA jitter, quarter-turn rotations and horizontal flips.

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::random::RandomStream;
use crate::raster::{RasterImage, TensorImage, CHANNELS};

/// Principal components of RGB pixel covariance, intensities scaled to
/// `[0, 1]`. `eigenvectors[i]` is the i-th principal direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorPCA {
    pub eigenvalues: [f64; 3],
    pub eigenvectors: [[f64; 3]; 3],
}

impl ColorPCA {
    /// A PCA whose jitter is always zero.
    pub fn degenerate() -> Self {
        ColorPCA {
            eigenvalues: [0.0; 3],
            eigenvectors: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    /// Matrix with the principal directions as columns.
    pub fn basis(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.eigenvectors[c][r])
    }

    /// Offset `sum_i alpha_i * lambda_i * v_i`.
    pub fn offset(&self, alpha: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for i in 0..3 {
            let w = alpha[i] * self.eigenvalues[i];
            for (c, o) in out.iter_mut().enumerate() {
                *o += w * self.eigenvectors[i][c];
            }
        }
        out
    }
}

/// Population covariance of all pixels, intensities divided by 255.
pub fn color_covariance<'a>(images: impl IntoIterator<Item = &'a RasterImage>) -> Result<Matrix3<f64>> {
    let mut n = 0usize;
    let mut sum = [0.0f64; 3];
    let mut cross = [[0.0f64; 3]; 3];
    for img in images {
        for px in img.pixels().chunks_exact(CHANNELS) {
            let v = [0, 1, 2].map(|c| f64::from(px[c]) / 255.0);
            for i in 0..3 {
                sum[i] += v[i];
                for j in 0..3 {
                    cross[i][j] += v[i] * v[j];
                }
            }
            n += 1;
        }
    }
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "color PCA needs at least 2 pixels, got {n}"
        )));
    }
    let nf = n as f64;
    Ok(Matrix3::from_fn(|i, j| cross[i][j] / nf - (sum[i] / nf) * (sum[j] / nf)))
}

pub fn fit_color_pca<'a>(images: impl IntoIterator<Item = &'a RasterImage>) -> Result<ColorPCA> {
    let cov = color_covariance(images)?;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut eigenvalues = [0.0; 3];
    let mut eigenvectors = [[0.0; 3]; 3];
    for (slot, &k) in order.iter().enumerate() {
        eigenvalues[slot] = eig.eigenvalues[k].max(0.0);
        let col = eig.eigenvectors.column(k);
        eigenvectors[slot] = [col[0], col[1], col[2]];
    }
    Ok(ColorPCA {
        eigenvalues,
        eigenvectors,
    })
}

/// Adds one PCA offset, drawn with `alpha_i ~ N(0, sigma^2)`, to every pixel.
pub fn jitter(image: &TensorImage, pca: &ColorPCA, rng: &mut RandomStream, sigma: f64) -> TensorImage {
    let alpha = [0; 3].map(|_| sigma * rng.standard_normal());
    let offset = pca.offset(alpha);
    image.map_pixels(|px| [px[0] + offset[0], px[1] + offset[1], px[2] + offset[2]])
}

/// Source coordinate for output `(x, y)` of a clockwise quarter-turn
/// rotation applied `k` times to a `w x h` image.
fn rotation_source(k: u8, w: usize, h: usize) -> impl Fn(usize, usize) -> (usize, usize) {
    move |x, y| match k % 4 {
        0 => (x, y),
        1 => (y, h - 1 - x),
        2 => (w - 1 - x, h - 1 - y),
        _ => (w - 1 - y, x),
    }
}

fn rotated_dims(k: u8, w: usize, h: usize) -> (usize, usize) {
    if k % 2 == 1 {
        (h, w)
    } else {
        (w, h)
    }
}

/// Image types that support exact pixel rearrangements.
pub trait Rearrange: Sized {
    fn rotate90(&self, k: u8) -> Self;
    fn hflip(&self) -> Self;
}

impl Rearrange for TensorImage {
    fn rotate90(&self, k: u8) -> Self {
        let (w, h) = (self.width(), self.height());
        let (nw, nh) = rotated_dims(k, w, h);
        self.remap(nw, nh, rotation_source(k, w, h))
    }

    fn hflip(&self) -> Self {
        let w = self.width();
        self.remap(w, self.height(), |x, y| (w - 1 - x, y))
    }
}

impl Rearrange for RasterImage {
    fn rotate90(&self, k: u8) -> Self {
        let (w, h) = self.dimensions();
        let (nw, nh) = rotated_dims(k, w, h);
        let src = rotation_source(k, w, h);
        RasterImage::from_fn(nw, nh, |x, y| {
            let (sx, sy) = src(x, y);
            self.pixel(sx, sy)
        })
        .expect("rotation preserves a valid extent")
    }

    fn hflip(&self) -> Self {
        let w = self.width();
        RasterImage::from_fn(w, self.height(), |x, y| self.pixel(w - 1 - x, y))
            .expect("flip preserves a valid extent")
    }
}

/// Clockwise quarter-turn rotation applied `k` times.
pub fn rotate90<I: Rearrange>(image: &I, k: u8) -> I {
    image.rotate90(k)
}

/// Mirror along the vertical axis (left and right swap).
pub fn hflip<I: Rearrange>(image: &I) -> I {
    image.hflip()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationMode {
    /// One uniformly random quarter-turn per sample.
    RandomQuarter,
    /// Every sample is used at all four orientations (see
    /// [`augment_variants`]); [`augment`] itself leaves orientation alone.
    AllFour,
    /// Always rotate by the given number of quarter-turns.
    Fixed(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub jitter_sigma: f64,
    pub flip_probability: f64,
    pub rotation_mode: RotationMode,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            jitter_sigma: 0.1,
            flip_probability: 0.5,
            rotation_mode: RotationMode::RandomQuarter,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.flip_probability) {
            return Err(Error::Range(format!(
                "flip probability {} outside [0, 1]",
                self.flip_probability
            )));
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err(Error::Range(format!("jitter sigma {}", self.jitter_sigma)));
        }
        Ok(())
    }

    /// No jitter, no rotation, no flips.
    pub fn identity() -> Self {
        AugmentConfig {
            jitter_sigma: 0.0,
            flip_probability: 0.0,
            rotation_mode: RotationMode::Fixed(0),
        }
    }
}

/// Jitter, then rotate, then flip with `flip_probability`.
///
/// Draw order from `rng` is fixed: three normals, one rotation draw (even
/// for non-random modes), one flip draw.
pub fn augment(
    image: &TensorImage,
    pca: &ColorPCA,
    config: &AugmentConfig,
    rng: &mut RandomStream,
) -> TensorImage {
    let jittered = jitter(image, pca, rng, config.jitter_sigma);
    let drawn = rng.below(4) as u8;
    let k = match config.rotation_mode {
        RotationMode::RandomQuarter => drawn,
        RotationMode::AllFour => 0,
        RotationMode::Fixed(k) => k % 4,
    };
    let rotated = jittered.rotate90(k);
    if rng.bernoulli(config.flip_probability) {
        rotated.hflip()
    } else {
        rotated
    }
}

/// Training views of one image: a single [`augment`] draw, or under
/// [`RotationMode::AllFour`] one view per quarter-turn.
pub fn augment_variants(
    image: &TensorImage,
    pca: &ColorPCA,
    config: &AugmentConfig,
    rng: &mut RandomStream,
) -> Vec<TensorImage> {
    match config.rotation_mode {
        RotationMode::AllFour => (0..4)
            .map(|k| {
                let cfg = AugmentConfig {
                    rotation_mode: RotationMode::Fixed(k),
                    ..*config
                };
                augment(image, pca, &cfg, rng)
            })
            .collect(),
        _ => vec![augment(image, pca, config, rng)],
    }
}
