mod common;

use common::{brute_force_interval, reference_matrix, reference_pairs, COHORT, REFERENCE_METRICS, REFERENCE_MATRIX, REFERENCE_TSV};
use polypscope::evaluation::{
    clopper_pearson, confusion, metrics, parse_confusion, report, ConfusionMatrix, MetricRow,
    MetricValue, ReportOptions,
};
use polypscope::ClassLabel;
use proptest::prelude::*;

fn rows(m: &ConfusionMatrix, options: &ReportOptions) -> Vec<MetricRow> {
    let r = report(m, options).unwrap();
    let mut out: Vec<MetricRow> = ClassLabel::ALL.iter().map(|&c| r.classes[c].clone()).collect();
    out.push(r.totals);
    out
}

fn cells(row: &MetricRow) -> [&MetricValue; 4] {
    [&row.balanced_accuracy, &row.precision, &row.recall, &row.f1]
}

#[test]
fn fixture_reconstructs_the_matrix() {
    let m = confusion(&reference_pairs()).unwrap();
    assert_eq!(m.counts, REFERENCE_MATRIX);
    assert_eq!(m.total(), 238);
    assert_eq!(parse_confusion(REFERENCE_TSV).unwrap(), m);
}

#[test]
fn hand_checked_cells() {
    let m = reference_matrix();
    use ClassLabel::*;
    assert_eq!(metrics::precision(&m, Tsa), 1.0);
    assert!((metrics::recall(&m, Tsa) - 34.0 / 38.0).abs() < 1e-15);
    assert!((metrics::precision(&m, Ta) - 35.0 / 42.0).abs() < 1e-15);
    assert!((metrics::recall(&m, Ta) - 35.0 / 39.0).abs() < 1e-15);
    // The printed matrix holds 238 slides, so HP specificity is 198/201.
    let hp = 0.5 * (30.0 / 37.0 + 198.0 / 201.0);
    assert!((metrics::balanced_accuracy(&m, Hp) - hp).abs() < 1e-15);
    assert_eq!((1000.0 * hp).round(), 898.0);
    assert!((metrics::balanced_accuracy(&m, Tsa) - 0.5 * (34.0 / 38.0 + 1.0)).abs() < 1e-15);
}

#[test]
fn every_published_percentage_within_a_tenth() {
    let got = rows(&reference_matrix(), &ReportOptions::default());
    for (r, (row, published)) in got.iter().zip(REFERENCE_METRICS).enumerate() {
        for (m, (value, cell)) in cells(row).iter().zip(published).enumerate() {
            let diff = (100.0 * value.value - cell.0).abs();
            assert!(diff <= 0.1 + 1e-9, "row {r} metric {m}: {} vs {}", 100.0 * value.value, cell.0);
        }
    }
}

#[test]
fn every_published_interval_within_three_tenths() {
    let options = ReportOptions { cohort_size: Some(COHORT), exact_intervals: false };
    let got = rows(&reference_matrix(), &options);
    let mut checked = 0;
    for (r, (row, published)) in got.iter().zip(REFERENCE_METRICS).enumerate() {
        for (m, (value, cell)) in cells(row).iter().zip(published).enumerate() {
            for (mine, theirs) in [(value.lower, cell.1), (value.upper, cell.2)] {
                assert!((100.0 * mine - theirs).abs() <= 0.3, "row {r} metric {m}: {} vs {theirs}", 100.0 * mine);
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 56);
}

#[test]
fn matrix_total_also_reproduces_intervals() {
    let got = rows(&reference_matrix(), &ReportOptions::default());
    for (row, published) in got.iter().zip(REFERENCE_METRICS) {
        for (value, cell) in cells(row).iter().zip(published) {
            assert!((100.0 * value.lower - cell.1).abs() <= 0.3);
            assert!((100.0 * value.upper - cell.2).abs() <= 0.3);
        }
    }
}

#[test]
fn exact_mode_uses_own_denominators() {
    let m = reference_matrix();
    let r = report(&m, &ReportOptions { cohort_size: None, exact_intervals: true }).unwrap();
    let recall = &r.classes[ClassLabel::Tsa].recall;
    assert_eq!((recall.lower, recall.upper), clopper_pearson(34, 38, 0.05).unwrap());
    // Balanced accuracy keeps the cohort convention.
    let cohort = report(&m, &ReportOptions::default()).unwrap();
    assert_eq!(r.classes[ClassLabel::Hp].balanced_accuracy, cohort.classes[ClassLabel::Hp].balanced_accuracy);
}

#[test]
fn diagonal_matrix_is_perfect() {
    let mut counts = [[0u64; 6]; 6];
    for (i, row) in counts.iter_mut().enumerate() {
        row[i] = 10;
    }
    let m = ConfusionMatrix::new(counts);
    let (lo, hi) = clopper_pearson(60, 60, 0.05).unwrap();
    for row in rows(&m, &ReportOptions::default()) {
        for v in cells(&row) {
            assert_eq!(v.value, 1.0);
            assert_eq!((v.lower, v.upper), (lo, hi));
        }
    }
}

#[test]
fn absent_class_yields_zero_not_nan() {
    let mut counts = [[0u64; 6]; 6];
    counts[0][0] = 5;
    counts[5][5] = 5;
    let r = report(&ConfusionMatrix::new(counts), &ReportOptions::default()).unwrap();
    let tsa = &r.classes[ClassLabel::Tsa];
    assert_eq!(tsa.precision.value, 0.0);
    assert_eq!(tsa.f1.value, 0.0);
    assert_eq!(tsa.precision.lower, 0.0);
    assert_eq!(tsa.precision.upper, clopper_pearson(0, 10, 0.05).unwrap().1);
    assert!(r.totals.f1.value.is_finite());
}

#[test]
fn json_shape() {
    let r = report(&reference_matrix(), &ReportOptions::default()).unwrap();
    let v: serde_json::Value = serde_json::to_value(&r).unwrap();
    assert_eq!(v["n_total"], 238);
    assert_eq!(v["totals"]["balanced_accuracy"]["pct"].as_str().unwrap().split(' ').next(), Some("93.0"));
    assert_eq!(v["classes"]["TSA"]["precision"]["value"].as_f64(), Some(1.0));
    assert!(r.to_table().lines().last().unwrap().contains("93.0"));
}

#[test]
fn matches_brute_force_oracle_up_to_100() {
    let mut worst: f64 = 0.0;
    for n in 1..=100u64 {
        for k in 0..=n {
            let (lo, hi) = clopper_pearson(k, n, 0.05).unwrap();
            let (olo, ohi) = brute_force_interval(k, n, 0.05);
            worst = worst.max((lo - olo).abs()).max((hi - ohi).abs());
        }
    }
    assert!(worst < 1e-6, "worst deviation {worst:e}");
}

#[test]
fn equal_support_mean_recall_is_overall_accuracy() {
    let mut counts = [[0u64; 6]; 6];
    for r in 0..6 {
        // Each reference column sums to 20.
        counts[r][r] = 14 + r as u64;
        counts[(r + 1) % 6][r] = 6 - r as u64;
    }
    let m = ConfusionMatrix::new(counts);
    let mean_recall = metrics::macro_average(&metrics::per_class(&m, metrics::recall));
    assert!((mean_recall - m.trace() as f64 / m.total() as f64).abs() < 1e-12);
}

fn matrix_strategy() -> impl Strategy<Value = [[u64; 6]; 6]> {
    prop::array::uniform6(prop::array::uniform6(0u64..20))
        .prop_filter("non-empty", |m| m.iter().flatten().sum::<u64>() > 0)
}

proptest! {
    #[test]
    fn interval_brackets_the_proportion(n in 1u64..400, frac in 0.0f64..=1.0) {
        let k = ((n as f64) * frac).floor() as u64;
        let (lo, hi) = clopper_pearson(k, n, 0.05).unwrap();
        let p = k as f64 / n as f64;
        prop_assert!(lo <= p && p <= hi);
        prop_assert!(0.0 <= lo && hi <= 1.0);
    }

    #[test]
    fn more_trials_narrow_the_interval(k in 1u64..50, n_mult in 2u64..5) {
        let n = k * n_mult;
        let (a, b) = clopper_pearson(k, n, 0.05).unwrap();
        let (c, d) = clopper_pearson(2 * k, 2 * n, 0.05).unwrap();
        prop_assert!(d - c < b - a);
    }

    #[test]
    fn f1_is_bounded_by_precision_and_recall(counts in matrix_strategy()) {
        let m = ConfusionMatrix::new(counts);
        for c in ClassLabel::ALL {
            let (p, r, f) = (metrics::precision(&m, c), metrics::recall(&m, c), metrics::f1(&m, c));
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert!(f <= p.max(r) + 1e-12);
            if p == r {
                prop_assert!((f - p).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn totals_survive_relabeling(
        counts in matrix_strategy(),
        perm in Just(vec![0usize, 1, 2, 3, 4, 5]).prop_shuffle(),
    ) {
        let m = ConfusionMatrix::new(counts);
        let perm: [usize; 6] = perm.try_into().unwrap();
        let a = report(&m, &ReportOptions::default()).unwrap().totals;
        let b = report(&m.permuted(&perm), &ReportOptions::default()).unwrap().totals;
        for (x, y) in cells(&a).iter().zip(cells(&b)) {
            prop_assert!((x.value - y.value).abs() < 1e-12);
        }
    }
}
