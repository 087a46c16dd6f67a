//! Exact (Clopper-Pearson) binomial confidence intervals.
//!
//! The binomial tail is evaluated through the regularized incomplete beta
//! function, `P(X >= k) = I_p(k, n - k + 1)`, and each endpoint is found by
//! bisection on `p`.

use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

/// Bisection stops once the bracket is narrower than this.
pub const BISECTION_TOLERANCE: f64 = 1e-12;

/// `P(X >= k)` for `X ~ Binomial(n, p)`, `1 <= k <= n`.
fn upper_tail(k: u64, n: u64, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    beta_reg(k as f64, (n - k + 1) as f64, p)
}

/// `P(X <= k)` for `X ~ Binomial(n, p)`, `0 <= k < n`.
fn lower_tail(k: u64, n: u64, p: f64) -> f64 {
    1.0 - upper_tail(k + 1, n, p)
}

/// Root of a monotone function on `[0, 1]` by bisection. `increasing`
/// gives the direction of `f`.
fn bisect(f: impl Fn(f64) -> f64, target: f64, increasing: bool) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > BISECTION_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        let below = f(mid) < target;
        if below == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Two-sided `1 - alpha` interval for `k` successes in `n` trials.
pub fn clopper_pearson(k: u64, n: u64, alpha: f64) -> Result<(f64, f64)> {
    if n == 0 || k > n {
        return Err(Error::Range(format!("invalid binomial count k={k}, n={n}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Range(format!("alpha {alpha} outside (0, 1)")));
    }
    let half = alpha / 2.0;
    let lower = if k == 0 {
        0.0
    } else {
        bisect(|p| upper_tail(k, n, p), half, true)
    };
    let upper = if k == n {
        1.0
    } else {
        bisect(|p| lower_tail(k, n, p), half, false)
    };
    Ok((lower, upper))
}
