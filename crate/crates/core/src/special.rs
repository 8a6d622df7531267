//! Standard normal density, distribution and log-distribution functions.
//!
//! `ln_norm_cdf` stays finite far into the lower tail: below `-8` it is
//! evaluated as `ln φ(x) + ln R(-x)` with the Mills ratio `R` taken from its
//! continued fraction, so no intermediate ever underflows.

use libm::erfc;
use std::f64::consts::SQRT_2;

/// `ln(sqrt(2π))`
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this argument the lower tail goes through the Mills ratio.
pub const LOWER_TAIL_SWITCH: f64 = -8.0;
const MILLS_TERMS: usize = 120;

#[inline]
pub fn ln_norm_pdf(x: f64) -> f64 {
    -LN_SQRT_2PI - 0.5 * x * x
}

#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    ln_norm_pdf(x).exp()
}

#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Upper-tail probability `1 - Φ(x)` without cancellation.
#[inline]
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Mills ratio `(1 - Φ(t)) / φ(t)` for large positive `t`.
///
/// Backward evaluation of `1 / (t + 1/(t + 2/(t + 3/(t + ...))))`.
pub fn mills_ratio(t: f64) -> f64 {
    debug_assert!(t >= 2.0, "continued fraction used outside its range");
    let mut f = t;
    for k in (1..=MILLS_TERMS).rev() {
        f = t + k as f64 / f;
    }
    1.0 / f
}

/// `x + φ(x)/Φ(x)`, the scaled conditional mean of a standard normal
/// truncated to `[-x, ∞)` shifted by `x`. For very negative `x` the sum is
/// taken from the tail of the continued fraction, avoiding cancellation.
pub fn truncated_mean_excess(x: f64) -> f64 {
    if x < LOWER_TAIL_SWITCH {
        // 1/R(t) = t + 1/f1 with f1 = t + 2/(t + 3/(...)), t = -x
        let t = -x;
        let mut f = t;
        for k in (2..=MILLS_TERMS).rev() {
            f = t + k as f64 / f;
        }
        1.0 / f
    } else {
        x + inv_mills(x)
    }
}

/// `ln Φ(x)`, finite for every finite `x`.
pub fn ln_norm_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < LOWER_TAIL_SWITCH {
        if x == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        ln_norm_pdf(x) + mills_ratio(-x).ln()
    } else if x > 5.0 {
        (-norm_sf(x)).ln_1p()
    } else {
        norm_cdf(x).ln()
    }
}

/// Inverse Mills ratio `φ(x) / Φ(x)`.
pub fn inv_mills(x: f64) -> f64 {
    if x < LOWER_TAIL_SWITCH {
        1.0 / mills_ratio(-x)
    } else {
        (ln_norm_pdf(x) - ln_norm_cdf(x)).exp()
    }
}

/// Two-sided normal p-value for a z statistic.
pub fn two_sided_p(z: f64) -> f64 {
    (2.0 * norm_sf(z.abs())).min(1.0)
}
