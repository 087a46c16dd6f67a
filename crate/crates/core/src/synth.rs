//! Synthetic datasets for tests, demos and smoke runs.
//!
//! Two generators: small color-blob images for three classes, and slides in
//! which each class is rendered as its own color texture.

use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::ingest::{
    format_crop_manifest, format_slide_manifest, write_atomic, write_image, Bounds, CropRecord,
    SlideRecord, SplitTag,
};
use crate::label::ClassLabel;
use crate::random::RandomStream;
use crate::raster::RasterImage;

/// Classes used by [`blob_dataset`].
pub const BLOB_CLASSES: [ClassLabel; 3] = [ClassLabel::Hp, ClassLabel::Ssp, ClassLabel::Tsa];

fn noisy(base: f64, spread: f64, rng: &mut RandomStream) -> u8 {
    (base + rng.uniform_range(-spread, spread)).round().clamp(0.0, 255.0) as u8
}

/// `count` square images cycling through [`BLOB_CLASSES`]: gray noise with
/// one disc whose color is red, green or blue depending on the class.
pub fn blob_dataset(count: usize, size: usize, seed: u64) -> Result<Vec<(RasterImage, ClassLabel)>> {
    let root = RandomStream::new(seed);
    (0..count)
        .map(|i| {
            let label = BLOB_CLASSES[i % BLOB_CLASSES.len()];
            let mut rng = root.derive_index(i as u64);
            let color = match i % 3 {
                0 => [220.0, 40.0, 40.0],
                1 => [40.0, 200.0, 60.0],
                _ => [50.0, 60.0, 220.0],
            };
            let s = size as f64;
            let radius = rng.uniform_range(0.2 * s, 0.3 * s);
            let cx = rng.uniform_range(radius, s - radius);
            let cy = rng.uniform_range(radius, s - radius);
            let img = RasterImage::from_fn(size, size, |x, y| {
                let dx = x as f64 + 0.5 - cx;
                let dy = y as f64 + 0.5 - cy;
                if dx * dx + dy * dy <= radius * radius {
                    color.map(|c| noisy(c, 20.0, &mut rng))
                } else {
                    let g = noisy(120.0, 30.0, &mut rng);
                    [g, g, g]
                }
            })?;
            Ok((img, label))
        })
        .collect()
}

/// One pixel of the class texture at `(x, y)`.
pub fn texture_pixel(label: ClassLabel, x: usize, y: usize, rng: &mut RandomStream) -> [u8; 3] {
    let (base, pattern): ([f64; 3], bool) = match label {
        ClassLabel::Hp => ([210.0, 90.0, 110.0], (y / 2) % 2 == 0),
        ClassLabel::Ssp => ([120.0, 60.0, 170.0], (x / 2) % 2 == 0),
        ClassLabel::Tsa => ([230.0, 170.0, 60.0], (x / 3 + y / 3) % 2 == 0),
        ClassLabel::Ta => ([70.0, 150.0, 90.0], ((x + y) / 2) % 2 == 0),
        ClassLabel::Tvv => ([60.0, 110.0, 210.0], x % 4 < 2 && y % 4 < 2),
        ClassLabel::Normal => ([235.0, 215.0, 225.0], false),
    };
    let shade = if pattern { -35.0 } else { 0.0 };
    base.map(|c| noisy(c + shade, 15.0, rng))
}

pub fn texture_field(label: ClassLabel, width: usize, height: usize, rng: &mut RandomStream) -> Result<RasterImage> {
    RasterImage::from_fn(width, height, |x, y| texture_pixel(label, x, y, rng))
}

/// A synthetic slide and the rectangle holding its lesion texture.
#[derive(Debug, Clone)]
pub struct SyntheticSlide {
    pub image: RasterImage,
    pub label: ClassLabel,
    pub lesion: Bounds,
}

/// Normal tissue everywhere, with a rectangle covering 60-80% of each axis
/// rendered in the class texture. Normal slides are uniform.
pub fn synthetic_slide(label: ClassLabel, width: usize, height: usize, rng: &mut RandomStream) -> Result<SyntheticSlide> {
    let extent = |n: usize, rng: &mut RandomStream| {
        let len = ((n as f64) * rng.uniform_range(0.6, 0.8)).round() as usize;
        let len = len.clamp(1, n);
        let start = rng.below(n - len + 1);
        (start, len)
    };
    let (x, w) = extent(width, rng);
    let (y, h) = extent(height, rng);
    let lesion = if label == ClassLabel::Normal {
        Bounds { x: 0, y: 0, width, height }
    } else {
        Bounds { x, y, width: w, height: h }
    };
    let image = RasterImage::from_fn(width, height, |px, py| {
        let inside = px >= lesion.x && px < lesion.x + lesion.width && py >= lesion.y && py < lesion.y + lesion.height;
        texture_pixel(if inside { label } else { ClassLabel::Normal }, px, py, rng)
    })?;
    Ok(SyntheticSlide { image, label, lesion })
}

#[derive(Debug, Clone)]
pub struct CohortSpec {
    pub slides_per_class: usize,
    pub slide_size: usize,
    /// Crops per slide, placed inside the lesion rectangle.
    pub crops_per_slide: usize,
    /// Nominal crop extent; actual crops vary by up to 2 pixels.
    pub crop_size: usize,
    pub split: SplitTag,
    pub seed: u64,
}

/// Paths written by [`write_cohort`].
#[derive(Debug, Clone)]
pub struct CohortFiles {
    pub slides: PathBuf,
    pub crops: PathBuf,
}

/// Renders a cohort under `dir`: one PPM per slide, a slide manifest with
/// paths relative to `dir`, and a crop manifest. Ids are prefixed with
/// `prefix`.
pub fn write_cohort(dir: &Path, prefix: &str, spec: &CohortSpec) -> Result<CohortFiles> {
    std::fs::create_dir_all(dir)?;
    let root = RandomStream::new(spec.seed);
    let mut slides = Vec::new();
    let mut crops = Vec::new();
    for label in ClassLabel::ALL {
        for i in 0..spec.slides_per_class {
            let id = format!("{prefix}{}_{i:03}", label.code().to_ascii_lowercase());
            let mut rng = root.derive(&id);
            let slide = synthetic_slide(label, spec.slide_size, spec.slide_size, &mut rng)?;
            let file = format!("{id}.ppm");
            write_image(&slide.image, dir.join(&file))?;
            for c in 0..spec.crops_per_slide {
                let jitter = |rng: &mut RandomStream| spec.crop_size + rng.below(5) - 2;
                let w = jitter(&mut rng).min(slide.lesion.width);
                let h = jitter(&mut rng).min(slide.lesion.height);
                let x = slide.lesion.x + rng.below(slide.lesion.width - w + 1);
                let y = slide.lesion.y + rng.below(slide.lesion.height - h + 1);
                crops.push(CropRecord {
                    id: format!("{id}_c{c}"),
                    parent_slide_id: id.clone(),
                    bounds: Bounds { x, y, width: w, height: h },
                    reference_label: label,
                });
            }
            slides.push(SlideRecord {
                id,
                image_path: PathBuf::from(file),
                reference_label: label,
                split_tag: spec.split,
            });
        }
    }
    let files = CohortFiles {
        slides: dir.join(format!("{prefix}slides.tsv")),
        crops: dir.join(format!("{prefix}crops.tsv")),
    };
    write_atomic(&files.slides, format_slide_manifest(&slides).as_bytes())?;
    write_atomic(&files.crops, format_crop_manifest(&crops).as_bytes())?;
    Ok(files)
}
