//! Slide-level decision rule over patch predictions.
//!
//! Each patch votes for its argmax class. Only the five polyp classes take
//! part in the vote; the class with the most votes (ties: higher mean
//! confidence, then canonical order) is reported when it has at least
//! `min_patches` votes and its voters' mean confidence reaches
//! `min_mean_confidence`. Otherwise the slide is `NORMAL`.

use serde::{Deserialize, Serialize};

use crate::classifier::{ClassifierHandle, PatchPrediction};
use crate::error::{Error, Result};
use crate::label::{argmax_class, ClassLabel, PerClass};
use crate::raster::RasterImage;
use crate::tiler::{extract, tile, PatchSpec};

/// Slack when comparing a mean confidence against its threshold, so that a
/// mean that is mathematically equal to the threshold passes.
const CONFIDENCE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionThresholds {
    pub min_patches: usize,
    pub min_mean_confidence: f64,
}

impl Default for DecisionThresholds {
    fn default() -> Self {
        DecisionThresholds {
            min_patches: 5,
            min_mean_confidence: 0.70,
        }
    }
}

impl DecisionThresholds {
    pub fn new(min_patches: usize, min_mean_confidence: f64) -> Result<Self> {
        if min_patches == 0 {
            return Err(Error::Range("min_patches must be at least 1".into()));
        }
        if !(min_mean_confidence > 0.0 && min_mean_confidence <= 1.0) {
            return Err(Error::Range(format!(
                "min_mean_confidence {min_mean_confidence} outside (0, 1]"
            )));
        }
        Ok(DecisionThresholds {
            min_patches,
            min_mean_confidence,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlideDecision {
    pub predicted: ClassLabel,
    /// Patches whose argmax is each class (NORMAL included).
    pub tallies: PerClass<usize>,
    /// Mean argmax confidence of each class's patches; 0 for empty classes.
    pub mean_confidence: PerClass<f64>,
    pub total_patches: usize,
}

/// Output document of the `infer` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlideReport<'a> {
    pub slide_id: &'a str,
    pub predicted: ClassLabel,
    pub total_patches: usize,
    pub tallies: PerClass<usize>,
    pub mean_confidence: PerClass<f64>,
}

impl SlideDecision {
    pub fn report<'a>(&self, slide_id: &'a str) -> SlideReport<'a> {
        SlideReport {
            slide_id,
            predicted: self.predicted,
            total_patches: self.total_patches,
            tallies: self.tallies,
            mean_confidence: self.mean_confidence,
        }
    }
}

pub fn aggregate(predictions: &[PatchPrediction], thresholds: &DecisionThresholds) -> SlideDecision {
    let mut confidences: PerClass<Vec<f64>> = PerClass::default();
    for p in predictions {
        let (label, conf) = argmax_class(&p.probabilities);
        confidences[label].push(conf);
    }
    let tallies = PerClass::from_fn(|l| confidences[l].len());
    // Sorting before summing makes the mean independent of input order.
    let mean_confidence = PerClass::from_fn(|l| {
        let mut c = confidences[l].clone();
        if c.is_empty() {
            return 0.0;
        }
        c.sort_by(f64::total_cmp);
        c.iter().sum::<f64>() / c.len() as f64
    });

    let candidate = ClassLabel::POLYPS
        .into_iter()
        .filter(|&l| tallies[l] > 0)
        .reduce(|best, l| {
            let better = tallies[l] > tallies[best]
                || (tallies[l] == tallies[best] && mean_confidence[l] > mean_confidence[best]);
            if better {
                l
            } else {
                best
            }
        });
    let predicted = match candidate {
        Some(c)
            if tallies[c] >= thresholds.min_patches
                && mean_confidence[c] + CONFIDENCE_SLACK >= thresholds.min_mean_confidence =>
        {
            c
        }
        _ => ClassLabel::Normal,
    };
    SlideDecision {
        predicted,
        tallies,
        mean_confidence,
        total_patches: predictions.len(),
    }
}

/// Tiles, extracts and classifies every patch of a slide. Patch ids are
/// `x_y`, or `scope/x_y` when a scope is given.
pub fn predict_patches(
    image: &RasterImage,
    handle: &ClassifierHandle,
    spec: &PatchSpec,
    scope: Option<&str>,
) -> Result<Vec<PatchPrediction>> {
    let patches: Vec<(String, RasterImage)> = tile(image.width(), image.height(), spec)
        .into_iter()
        .map(|origin| {
            let id = match scope {
                Some(s) => format!("{s}/{}", origin.patch_id()),
                None => origin.patch_id(),
            };
            extract(image, origin, spec).map(|p| (id, p))
        })
        .collect::<Result<_>>()?;
    handle.classify_batch(&patches)
}

pub fn classify_slide(
    image: &RasterImage,
    handle: &ClassifierHandle,
    spec: &PatchSpec,
    thresholds: &DecisionThresholds,
) -> Result<SlideDecision> {
    let predictions = predict_patches(image, handle, spec, None)?;
    Ok(aggregate(&predictions, thresholds))
}
