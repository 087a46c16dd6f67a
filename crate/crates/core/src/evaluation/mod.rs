//! Confusion matrices, per-class metrics and exact binomial intervals.

mod confusion;
mod interval;
pub mod metrics;
mod report;

pub use confusion::{confusion, load_confusion, parse_confusion, BinaryCounts, ConfusionMatrix};
pub use interval::{clopper_pearson, BISECTION_TOLERANCE};
pub use report::{cohort_interval, report, MetricReport, MetricRow, MetricValue, ReportOptions, DEFAULT_ALPHA};
