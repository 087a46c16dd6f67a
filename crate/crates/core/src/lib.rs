//! Whole-slide colorectal polyp classification.
//!
//! Slides are tiled into overlapping patches, each patch is classified into
//! one of six classes by a small residual network (or replayed from recorded
//! predictions), and the patch votes are aggregated into a slide label.
//! The [`evaluation`] module scores slide predictions with exact binomial
//! confidence intervals.

pub mod classifier;
pub mod cli;
pub mod error;
pub mod evaluation;
pub mod inference;
pub mod ingest;
pub mod label;
pub mod nnet;
pub mod preprocess;
pub mod random;
pub mod raster;
pub mod synth;
pub mod tiler;

pub use error::{Error, Result};
pub use label::{ClassLabel, PerClass, ProbVector};
pub use random::RandomStream;
pub use raster::{RasterImage, TensorImage};
