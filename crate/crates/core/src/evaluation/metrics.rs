use crate::evaluation::confusion::ConfusionMatrix;
use crate::label::{ClassLabel, PerClass};

/// `num / den`, with `0 / 0` read as 0.
pub fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Sensitivity, `TP / (TP + FN)`.
pub fn recall(m: &ConfusionMatrix, c: ClassLabel) -> f64 {
    let b = m.binary(c);
    ratio(b.tp, b.tp + b.fn_)
}

pub fn precision(m: &ConfusionMatrix, c: ClassLabel) -> f64 {
    let b = m.binary(c);
    ratio(b.tp, b.tp + b.fp)
}

pub fn specificity(m: &ConfusionMatrix, c: ClassLabel) -> f64 {
    let b = m.binary(c);
    ratio(b.tn, b.tn + b.fp)
}

/// Negative predictive value, `TN / (TN + FN)`.
pub fn npv(m: &ConfusionMatrix, c: ClassLabel) -> f64 {
    let b = m.binary(c);
    ratio(b.tn, b.tn + b.fn_)
}

pub fn f1(m: &ConfusionMatrix, c: ClassLabel) -> f64 {
    let p = precision(m, c);
    let r = recall(m, c);
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Mean of sensitivity and specificity. This is the figure reported in the
/// "accuracy" column.
pub fn balanced_accuracy(m: &ConfusionMatrix, c: ClassLabel) -> f64 {
    0.5 * (recall(m, c) + specificity(m, c))
}

/// Plain one-vs-rest accuracy, `(TP + TN) / N`.
pub fn ovr_accuracy(m: &ConfusionMatrix, c: ClassLabel) -> f64 {
    let b = m.binary(c);
    ratio(b.tp + b.tn, m.total())
}

pub fn per_class(m: &ConfusionMatrix, f: impl Fn(&ConfusionMatrix, ClassLabel) -> f64) -> PerClass<f64> {
    PerClass::from_fn(|c| f(m, c))
}

/// Unweighted mean over the six classes.
pub fn macro_average(values: &PerClass<f64>) -> f64 {
    values.values().iter().sum::<f64>() / values.values().len() as f64
}
