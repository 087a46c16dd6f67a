use crate::label::{ClassLabel, NUM_CLASSES};

/// Softmax cross-entropy of six logits against `label`.
/// Returns `(loss, d loss / d logits)`; the gradient is `softmax - onehot`.
pub fn softmax_xent(logits: &[f64; NUM_CLASSES], label: ClassLabel) -> (f64, [f64; NUM_CLASSES]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut exp = [0.0; NUM_CLASSES];
    let mut sum = 0.0;
    for (e, &z) in exp.iter_mut().zip(logits) {
        *e = (z - max).exp();
        sum += *e;
    }
    let log_sum = sum.ln() + max;
    let loss = log_sum - logits[label.index()];
    let mut grad = exp.map(|e| e / sum);
    grad[label.index()] -= 1.0;
    (loss, grad)
}
