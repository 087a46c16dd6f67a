//! Dataset manifests, raster file I/O and the train/validation split.

mod manifest;
mod pnm;
mod split;

pub use manifest::{
    format_crop_manifest, format_slide_manifest, load_crop_manifest, load_manifest,
    load_slide_manifest, parse_manifest, validate_crops, Bounds, CropRecord, Labeled, Manifest,
    SlideRecord, SplitTag, CROP_HEADER, SLIDE_HEADER,
};
pub use pnm::{decode_pnm, encode_ppm, read_image, write_atomic, write_image, MAX_PIXELS};
pub use split::{split_dataset, validation_count};
