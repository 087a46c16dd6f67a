//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use polypscope::evaluation::ConfusionMatrix;
use polypscope::nnet::{ArchConfig, BlockSpec, Tensor, TinyResNet};
use polypscope::tiler::{PatchOrigin, PatchSpec};
use polypscope::{ClassLabel, RandomStream};

/// Published slide-level confusion matrix: rows predicted, columns
/// reference, both in HP, SSP, TSA, TA, TVA/V, Normal order.
pub const REFERENCE_MATRIX: [[u64; 6]; 6] = [
    [30, 3, 0, 0, 0, 0],
    [5, 31, 0, 0, 0, 0],
    [0, 0, 34, 0, 0, 0],
    [0, 0, 2, 35, 3, 2],
    [0, 0, 0, 1, 35, 0],
    [2, 4, 2, 3, 0, 46],
];

pub const REFERENCE_TSV: &str = "prediction\tHP\tSSP\tTSA\tTA\tTVA/V\tNormal
HP\t30\t3\t0\t0\t0\t0
SSP\t5\t31\t0\t0\t0\t0
TSA\t0\t0\t34\t0\t0\t0
TA\t0\t0\t2\t35\t3\t2
TVA/V\t0\t0\t0\t1\t35\t0
Normal\t2\t4\t2\t3\t0\t46
";

/// Reported cohort size; the printed matrix sums to one less.
pub const COHORT: u64 = 239;

/// One published cell: value, lower and upper bound, in percent.
pub type Cell = (f64, f64, f64);

/// Published per-class rows (HP..Normal) and the total row, each as
/// accuracy, precision, recall, F1.
pub const REFERENCE_METRICS: [[Cell; 4]; 7] = [
    [(89.8, 85.3, 93.3), (90.9, 86.6, 94.2), (81.1, 75.5, 85.8), (85.7, 80.6, 89.9)],
    [(89.5, 85.0, 93.1), (86.1, 81.1, 90.2), (81.6, 76.1, 86.3), (83.8, 78.5, 88.2)],
    [(94.7, 91.1, 97.2), (100.0, 98.5, 100.0), (89.5, 84.9, 93.0), (94.4, 90.8, 97.0)],
    [(93.1, 89.2, 96.0), (83.3, 78.0, 87.8), (89.7, 85.2, 93.3), (86.4, 81.4, 90.5)],
    [(95.8, 92.5, 97.9), (97.2, 94.3, 98.9), (92.1, 88.0, 95.2), (94.6, 90.9, 97.1)],
    [(95.0, 91.5, 97.4), (80.7, 75.1, 85.5), (95.8, 92.5, 98.0), (87.6, 82.8, 91.5)],
    [(93.0, 89.0, 95.9), (89.7, 85.2, 93.2), (88.3, 83.6, 92.1), (88.8, 84.1, 92.5)],
];

pub const METRIC_NAMES: [&str; 4] = ["accuracy", "precision", "recall", "f1"];

pub fn reference_matrix() -> ConfusionMatrix {
    ConfusionMatrix::new(REFERENCE_MATRIX)
}

/// (predicted, reference) pairs that reproduce [`REFERENCE_MATRIX`].
pub fn reference_pairs() -> Vec<(ClassLabel, ClassLabel)> {
    let mut pairs = Vec::new();
    for (p, row) in REFERENCE_MATRIX.iter().enumerate() {
        for (r, &n) in row.iter().enumerate() {
            for _ in 0..n {
                pairs.push((ClassLabel::from_index(p).unwrap(), ClassLabel::from_index(r).unwrap()));
            }
        }
    }
    pairs
}

/// `P(X <= k)` by summing probability masses directly, each obtained from
/// the previous one by the ratio `pmf(j+1)/pmf(j)`.
pub fn binomial_cdf(k: u64, n: u64, p: f64) -> f64 {
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return if k >= n { 1.0 } else { 0.0 };
    }
    let odds = (p / (1.0 - p)).ln();
    let mut log_pmf = n as f64 * (1.0 - p).ln();
    let mut total = log_pmf.exp();
    for j in 0..k {
        log_pmf += ((n - j) as f64 / (j + 1) as f64).ln() + odds;
        total += log_pmf.exp();
    }
    total.min(1.0)
}

/// Exact interval by bisection on the summed binomial tails.
pub fn brute_force_interval(k: u64, n: u64, alpha: f64) -> (f64, f64) {
    let bisect = |f: &dyn Fn(f64) -> bool| {
        // f is true on the low side of the root.
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if f(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let lower = if k == 0 {
        0.0
    } else {
        // P(X >= k) = 1 - P(X <= k - 1) rises with p.
        bisect(&|p| 1.0 - binomial_cdf(k - 1, n, p) < alpha / 2.0)
    };
    let upper = if k == n {
        1.0
    } else {
        bisect(&|p| binomial_cdf(k, n, p) > alpha / 2.0)
    };
    (lower, upper)
}

/// Marks every pixel covered by a patch and reports whether all are.
pub fn covers_every_pixel(width: usize, height: usize, origins: &[PatchOrigin], spec: &PatchSpec) -> bool {
    let mut hit = vec![false; width * height];
    for o in origins {
        for y in o.y..(o.y + spec.patch_height).min(height) {
            for x in o.x..(o.x + spec.patch_width).min(width) {
                hit[y * width + x] = true;
            }
        }
    }
    hit.iter().all(|&h| h)
}

/// Stem plus one identity block and one projection block.
pub fn gradcheck_arch() -> ArchConfig {
    ArchConfig {
        in_channels: 3,
        stem_channels: 3,
        blocks: vec![
            BlockSpec { out_channels: 3, stride: 1 },
            BlockSpec { out_channels: 4, stride: 2 },
        ],
    }
}

pub fn random_tensor(shape: Vec<usize>, rng: &mut RandomStream) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect()).unwrap()
}

pub const FD_STEP: f64 = 1e-5;

/// `|a - n| / max(|a|, |n|)`, with the denominator floored at `floor` so
/// that coordinates whose true gradient is essentially zero are compared
/// absolutely.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Largest relative error between analytic and central-difference
/// gradients over every parameter and every input value of a randomly
/// initialized network.
pub fn model_gradient_error(arch: &ArchConfig, seed: u64, size: usize) -> f64 {
    let mut rng = RandomStream::new(seed);
    let model = TinyResNet::new(arch, &mut rng).unwrap();
    let input = random_tensor(vec![arch.in_channels, size, size], &mut rng);
    let label = ClassLabel::from_index(rng.below(6)).unwrap();

    let cache = model.forward_cached(&input).unwrap();
    let (_, d_logits) = polypscope::nnet::softmax_xent(cache.logits(), label);
    let (grads, d_input) = model.backward_from_logits(&cache, &d_logits).unwrap();
    let analytic = grads.flat_params();

    let base = model.flat_params();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for i in 0..base.len() {
        let mut at = |delta: f64| {
            let mut p = base.clone();
            p[i] += delta;
            probe.set_flat_params(&p).unwrap();
            probe.loss(&input, label).unwrap()
        };
        let numeric = (at(FD_STEP) - at(-FD_STEP)) / (2.0 * FD_STEP);
        worst = worst.max(relative_error(analytic[i], numeric, 1e-6));
    }
    for i in 0..input.data().len() {
        let at = |delta: f64| {
            let mut x = input.clone();
            x.data_mut()[i] += delta;
            model.loss(&x, label).unwrap()
        };
        let numeric = (at(FD_STEP) - at(-FD_STEP)) / (2.0 * FD_STEP);
        worst = worst.max(relative_error(d_input.data()[i], numeric, 1e-6));
    }
    worst
}

/// One randomized tiling instance: full coverage and the stride bound.
pub fn check_tiling_case(rng: &mut RandomStream) -> Result<(), String> {
    let w = 1 + rng.below(400);
    let h = 1 + rng.below(400);
    let pw = 2 + rng.below(120);
    let ph = 2 + rng.below(120);
    let spec = PatchSpec::new(pw, ph, 1.0 / 3.0).map_err(|e| e.to_string())?;
    let origins = polypscope::tiler::tile(w, h, &spec);
    if !covers_every_pixel(w, h, &origins, &spec) {
        return Err(format!("{w}x{h} with {pw}x{ph} leaves pixels uncovered"));
    }
    if spec.stride_x() > 2 * pw / 3 || spec.stride_y() > 2 * ph / 3 {
        return Err(format!("stride {}x{} too large for {pw}x{ph}", spec.stride_x(), spec.stride_y()));
    }
    Ok(())
}

pub fn random_votes(rng: &mut RandomStream, max_len: usize) -> Vec<polypscope::classifier::PatchPrediction> {
    let n = rng.below(max_len + 1);
    (0..n)
        .map(|i| {
            let raw: [f64; 6] = std::array::from_fn(|_| rng.uniform().powi(3) + 1e-3);
            let sum: f64 = raw.iter().sum();
            polypscope::classifier::PatchPrediction {
                patch_id: format!("p{i}"),
                probabilities: polypscope::ProbVector::renormalized(raw.map(|v| v / sum), 1e-6).unwrap(),
            }
        })
        .collect()
}

/// Shuffling the votes never changes the decision, and relaxing the
/// thresholds never turns a polyp call into a different polyp call.
pub fn check_decision_case(rng: &mut RandomStream) -> Result<(), String> {
    use polypscope::inference::{aggregate, DecisionThresholds};
    let votes = random_votes(rng, 40);
    let strict = DecisionThresholds::new(1 + rng.below(8), rng.uniform_range(0.2, 0.9)).unwrap();
    let lax = DecisionThresholds::new(
        1 + rng.below(strict.min_patches),
        rng.uniform_range(0.1, strict.min_mean_confidence),
    )
    .unwrap();
    let base = aggregate(&votes, &strict);
    let mut shuffled = votes.clone();
    rng.shuffle(&mut shuffled);
    let again = aggregate(&shuffled, &strict);
    if again != base {
        return Err(format!("order changed the decision: {base:?} vs {again:?}"));
    }
    let relaxed = aggregate(&votes, &lax);
    if base.predicted != ClassLabel::Normal && relaxed.predicted != base.predicted {
        return Err(format!("relaxing thresholds moved {} to {}", base.predicted, relaxed.predicted));
    }
    if relaxed.predicted == ClassLabel::Normal && base.predicted != ClassLabel::Normal {
        return Err("relaxing thresholds rejected a call".into());
    }
    Ok(())
}

/// Rotation group law, flip involution, zero-sigma jitter, constant jitter
/// offset and the normalize/denormalize round trip on one random image.
pub fn check_augmentation_laws(rng: &mut RandomStream) -> Result<(), String> {
    use polypscope::preprocess::{compute_stats, denormalize, fit_color_pca, hflip, jitter, normalize, rotate90};
    use polypscope::RasterImage;
    let w = 1 + rng.below(24);
    let h = 1 + rng.below(24);
    let img = RasterImage::from_fn(w, h, |_, _| [0; 3].map(|_| rng.below(256) as u8)).unwrap();

    let mut r = img.clone();
    for _ in 0..4 {
        r = rotate90(&r, 1);
    }
    if r != img {
        return Err(format!("four quarter-turns changed a {w}x{h} image"));
    }
    if rotate90(&img, 4) != img || rotate90(&rotate90(&img, 3), 1) != img {
        return Err("rotation counts do not compose".into());
    }
    if hflip(&hflip(&img)) != img {
        return Err("double flip changed the image".into());
    }

    let stats = compute_stats([&img]).unwrap();
    let t = normalize(&img, &stats);
    for (back, &orig) in denormalize(&t, &stats).iter().zip(img.pixels()) {
        if (back - f64::from(orig)).abs() > 1e-9 {
            return Err(format!("round trip gave {back} for {orig}"));
        }
    }

    let pca = if w * h >= 2 {
        fit_color_pca([&img]).unwrap()
    } else {
        polypscope::preprocess::ColorPCA::degenerate()
    };
    let same = jitter(&t, &pca, &mut rng.derive("j0"), 0.0);
    if same.values() != t.values() {
        return Err("zero-sigma jitter changed values".into());
    }
    let shifted = jitter(&t, &pca, &mut rng.derive("j1"), rng.uniform_range(0.01, 1.0));
    let delta: Vec<f64> = shifted.values().iter().zip(t.values()).map(|(a, b)| a - b).collect();
    for px in delta.chunks_exact(3) {
        for c in 0..3 {
            if (px[c] - delta[c]).abs() > 1e-12 {
                return Err("jitter offset differs between pixels".into());
            }
        }
    }
    Ok(())
}
