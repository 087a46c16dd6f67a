//! Class labels, per-class tables and probability vectors.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Number of slide/patch categories.
pub const NUM_CLASSES: usize = 6;

/// The six categories, in canonical order. The order is used for every
/// serialization and every tie-break.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClassLabel {
    Hp,
    Ssp,
    Tsa,
    Ta,
    Tvv,
    Normal,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; NUM_CLASSES] = [
        ClassLabel::Hp,
        ClassLabel::Ssp,
        ClassLabel::Tsa,
        ClassLabel::Ta,
        ClassLabel::Tvv,
        ClassLabel::Normal,
    ];

    /// The five polyp classes (everything except `Normal`).
    pub const POLYPS: [ClassLabel; 5] = [
        ClassLabel::Hp,
        ClassLabel::Ssp,
        ClassLabel::Tsa,
        ClassLabel::Ta,
        ClassLabel::Tvv,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<ClassLabel> {
        Self::ALL.get(index).copied()
    }

    pub fn code(self) -> &'static str {
        match self {
            ClassLabel::Hp => "HP",
            ClassLabel::Ssp => "SSP",
            ClassLabel::Tsa => "TSA",
            ClassLabel::Ta => "TA",
            ClassLabel::Tvv => "TVV",
            ClassLabel::Normal => "NORMAL",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ClassLabel::Hp => "hyperplastic polyp",
            ClassLabel::Ssp => "sessile serrated polyp",
            ClassLabel::Tsa => "traditional serrated adenoma",
            ClassLabel::Ta => "tubular adenoma",
            ClassLabel::Tvv => "tubulovillous/villous adenoma",
            ClassLabel::Normal => "normal",
        }
    }

    pub fn is_polyp(self) -> bool {
        self != ClassLabel::Normal
    }
}

/// Parses a label from its code or display name, ignoring case.
/// `TVA/V` and `TVA` are accepted as aliases of `TVV`.
pub fn parse_label(text: &str) -> Result<ClassLabel> {
    let trimmed = text.trim();
    for label in ClassLabel::ALL {
        if trimmed.eq_ignore_ascii_case(label.code())
            || trimmed.eq_ignore_ascii_case(label.display_name())
        {
            return Ok(label);
        }
    }
    if trimmed.eq_ignore_ascii_case("TVA/V") || trimmed.eq_ignore_ascii_case("TVA") {
        return Ok(ClassLabel::Tvv);
    }
    Err(Error::UnknownLabel(text.to_string()))
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_label(s)
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl Serialize for ClassLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for ClassLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_label(&text).map_err(serde::de::Error::custom)
    }
}

/// One value per class, indexed by [`ClassLabel`]. Serializes as a JSON
/// object keyed by label code in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PerClass<T>(pub [T; NUM_CLASSES]);

impl<T> PerClass<T> {
    pub fn from_fn(mut f: impl FnMut(ClassLabel) -> T) -> Self {
        PerClass(ClassLabel::ALL.map(&mut f))
    }

    pub fn iter(&self) -> impl Iterator<Item = (ClassLabel, &T)> {
        ClassLabel::ALL.into_iter().zip(self.0.iter())
    }

    pub fn values(&self) -> &[T; NUM_CLASSES] {
        &self.0
    }
}

impl<T> Index<ClassLabel> for PerClass<T> {
    type Output = T;

    fn index(&self, label: ClassLabel) -> &T {
        &self.0[label.index()]
    }
}

impl<T> IndexMut<ClassLabel> for PerClass<T> {
    fn index_mut(&mut self, label: ClassLabel) -> &mut T {
        &mut self.0[label.index()]
    }
}

impl<T: Serialize> Serialize for PerClass<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(NUM_CLASSES))?;
        for (label, value) in self.iter() {
            map.serialize_entry(label.code(), value)?;
        }
        map.end()
    }
}

impl<'de, T: Deserialize<'de> + Default + Copy> Deserialize<'de> for PerClass<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = std::collections::BTreeMap::<String, T>::deserialize(deserializer)?;
        let mut out = PerClass::<T>::default();
        for (key, value) in raw {
            let label = parse_label(&key).map_err(serde::de::Error::custom)?;
            out[label] = value;
        }
        Ok(out)
    }
}

/// Tolerance on the sum of a probability vector.
pub const PROB_SUM_TOLERANCE: f64 = 1e-6;

/// Six nonnegative probabilities summing to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbVector(PerClass<f64>);

impl ProbVector {
    /// Validates entries in `[0, 1]` summing to 1 within [`PROB_SUM_TOLERANCE`].
    pub fn new(values: [f64; NUM_CLASSES]) -> Result<Self> {
        if let Some(bad) = values
            .iter()
            .find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(Error::InvalidProbabilities(format!(
                "entry {bad} outside [0, 1]"
            )));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(Error::InvalidProbabilities(format!(
                "entries sum to {sum}"
            )));
        }
        Ok(ProbVector(PerClass(values)))
    }

    /// Accepts nonnegative entries whose sum is within `tolerance` of 1 and
    /// rescales them to sum to 1. Vectors already within
    /// [`PROB_SUM_TOLERANCE`] are kept as given, so the operation is
    /// idempotent.
    pub fn renormalized(values: [f64; NUM_CLASSES], tolerance: f64) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidProbabilities(format!(
                "entry {bad} is negative or not finite"
            )));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > tolerance {
            return Err(Error::InvalidProbabilities(format!(
                "entries sum to {sum}, beyond tolerance {tolerance}"
            )));
        }
        if (sum - 1.0).abs() <= PROB_SUM_TOLERANCE {
            return Self::new(values);
        }
        Self::new(values.map(|v| (v / sum).min(1.0)))
    }

    pub fn one_hot(label: ClassLabel) -> Self {
        let mut values = [0.0; NUM_CLASSES];
        values[label.index()] = 1.0;
        ProbVector(PerClass(values))
    }

    pub fn uniform() -> Self {
        ProbVector(PerClass([1.0 / NUM_CLASSES as f64; NUM_CLASSES]))
    }

    /// Softmax of six logits, computed with max-subtraction.
    pub fn softmax(logits: &[f64]) -> Result<Self> {
        if logits.len() != NUM_CLASSES {
            return Err(Error::Shape(format!(
                "expected {NUM_CLASSES} logits, got {}",
                logits.len()
            )));
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut values = [0.0; NUM_CLASSES];
        let mut sum = 0.0;
        for (out, &z) in values.iter_mut().zip(logits) {
            *out = (z - max).exp();
            sum += *out;
        }
        for v in values.iter_mut() {
            *v /= sum;
        }
        Ok(ProbVector(PerClass(values)))
    }

    pub fn get(&self, label: ClassLabel) -> f64 {
        self.0[label]
    }

    pub fn values(&self) -> &[f64; NUM_CLASSES] {
        self.0.values()
    }
}

impl Index<ClassLabel> for ProbVector {
    type Output = f64;

    fn index(&self, label: ClassLabel) -> &f64 {
        &self.0[label]
    }
}

/// The most probable label and its probability. Ties go to the label that
/// comes first in canonical order.
pub fn argmax_class(p: &ProbVector) -> (ClassLabel, f64) {
    let mut best = ClassLabel::Hp;
    let mut best_value = p[best];
    for label in ClassLabel::ALL.into_iter().skip(1) {
        if p[label] > best_value {
            best = label;
            best_value = p[label];
        }
    }
    (best, best_value)
}
