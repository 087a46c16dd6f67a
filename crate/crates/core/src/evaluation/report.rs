use serde::Serialize;

use crate::error::Result;
use crate::evaluation::confusion::ConfusionMatrix;
use crate::evaluation::interval::clopper_pearson;
use crate::evaluation::metrics::{self, macro_average, per_class};
use crate::label::{ClassLabel, PerClass};

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReportOptions {
    /// Trial count for the interval of every metric. Defaults to the
    /// matrix total.
    pub cohort_size: Option<u64>,
    /// Use each metric's own numerator and denominator where the metric is
    /// a binomial proportion. Balanced accuracy, F1 and the macro totals
    /// keep the cohort convention either way.
    pub exact_intervals: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricValue {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    /// `"89.8 (85.3-93.3)"`.
    pub pct: String,
}

impl MetricValue {
    fn new(value: f64, (lower, upper): (f64, f64)) -> Self {
        MetricValue {
            value,
            lower,
            upper,
            pct: format!("{:.1} ({:.1}-{:.1})", 100.0 * value, 100.0 * lower, 100.0 * upper),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    /// Sensitivity-specificity mean, reported as "accuracy".
    pub balanced_accuracy: MetricValue,
    pub precision: MetricValue,
    pub recall: MetricValue,
    pub f1: MetricValue,
    pub specificity: MetricValue,
    pub npv: MetricValue,
    /// Plain one-vs-rest accuracy, `(TP + TN) / N`.
    pub ovr_accuracy: MetricValue,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub n_total: u64,
    /// Trial count used for cohort-convention intervals.
    pub interval_n: u64,
    pub alpha: f64,
    pub classes: PerClass<MetricRow>,
    /// Unweighted means over the six classes.
    pub totals: MetricRow,
}

/// Interval for a proportion `value` observed over `n` trials, with the
/// success count recovered as the nearest integer to `value * n`.
pub fn cohort_interval(value: f64, n: u64, alpha: f64) -> Result<(f64, f64)> {
    let k = ((value * n as f64 + 0.5).floor() as u64).min(n);
    clopper_pearson(k, n, alpha)
}

pub fn report(m: &ConfusionMatrix, options: &ReportOptions) -> Result<MetricReport> {
    let total = m.total();
    let n = options.cohort_size.unwrap_or(total);
    let alpha = DEFAULT_ALPHA;
    let cohort = |v: f64| -> Result<MetricValue> { Ok(MetricValue::new(v, cohort_interval(v, n, alpha)?)) };
    // Exact mode: (k, den) when the denominator is non-empty.
    let binomial = |v: f64, k: u64, den: u64| -> Result<MetricValue> {
        if options.exact_intervals && den > 0 {
            Ok(MetricValue::new(v, clopper_pearson(k, den, alpha)?))
        } else {
            cohort(v)
        }
    };

    let mut rows = Vec::with_capacity(ClassLabel::ALL.len());
    for c in ClassLabel::ALL {
        let b = m.binary(c);
        rows.push(MetricRow {
            balanced_accuracy: cohort(metrics::balanced_accuracy(m, c))?,
            precision: binomial(metrics::precision(m, c), b.tp, b.tp + b.fp)?,
            recall: binomial(metrics::recall(m, c), b.tp, b.tp + b.fn_)?,
            f1: cohort(metrics::f1(m, c))?,
            specificity: binomial(metrics::specificity(m, c), b.tn, b.tn + b.fp)?,
            npv: binomial(metrics::npv(m, c), b.tn, b.tn + b.fn_)?,
            ovr_accuracy: binomial(metrics::ovr_accuracy(m, c), b.tp + b.tn, total)?,
        });
    }
    let macro_row = MetricRow {
        balanced_accuracy: cohort(macro_average(&per_class(m, metrics::balanced_accuracy)))?,
        precision: cohort(macro_average(&per_class(m, metrics::precision)))?,
        recall: cohort(macro_average(&per_class(m, metrics::recall)))?,
        f1: cohort(macro_average(&per_class(m, metrics::f1)))?,
        specificity: cohort(macro_average(&per_class(m, metrics::specificity)))?,
        npv: cohort(macro_average(&per_class(m, metrics::npv)))?,
        ovr_accuracy: cohort(macro_average(&per_class(m, metrics::ovr_accuracy)))?,
    };
    let mut rows = rows.into_iter();
    let classes = PerClass::from_fn(|_| rows.next().expect("one row per class"));
    Ok(MetricReport {
        n_total: total,
        interval_n: n,
        alpha,
        classes,
        totals: macro_row,
    })
}

impl MetricReport {
    /// Fixed-width table of the four headline metrics.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<8}{:>20}{:>20}{:>20}{:>20}\n",
            "class", "accuracy", "precision", "recall", "f1"
        );
        let line = |name: &str, r: &MetricRow| {
            format!(
                "{:<8}{:>20}{:>20}{:>20}{:>20}\n",
                name, r.balanced_accuracy.pct, r.precision.pct, r.recall.pct, r.f1.pct
            )
        };
        for c in ClassLabel::ALL {
            out.push_str(&line(c.code(), &self.classes[c]));
        }
        out.push_str(&line("total", &self.totals));
        out
    }
}
