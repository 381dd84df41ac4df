//! Floating-point helpers.
//!
//! `core` has no transcendental functions, so everything routes through
//! `libm`. The log-space helpers treat `-inf` as an exact zero.

pub use libm::{exp, expm1, log, log1p, pow, sqrt};

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

/// `log(exp(a) + exp(b))` without overflow.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a > b {
        a + log1p(exp(b - a))
    } else {
        b + log1p(exp(a - b))
    }
}

/// `log(sum(exp(xs)))`; `-inf` for an empty slice or all `-inf` entries.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m.is_nan() {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| exp(x - m)).sum();
    m + ln(s)
}

/// Replaces logits by their softmax, subtracting the maximum first.
pub fn softmax_in_place(xs: &mut [f64]) {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in xs.iter_mut() {
        *x = exp(*x - m);
        total += *x;
    }
    for x in xs.iter_mut() {
        *x /= total;
    }
}

/// Replaces logits by log-softmax values.
pub fn log_softmax_in_place(xs: &mut [f64]) {
    let lse = log_sum_exp(xs);
    for x in xs.iter_mut() {
        *x -= lse;
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    ln(p) - log1p(-p)
}

/// `log(sigmoid(x))`, stable for large |x|.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -log1p(exp(-x))
    } else {
        x - log1p(exp(x))
    }
}

/// Log-density of `Normal(mean, sd^2)`.
#[inline]
pub fn normal_log_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - ln(sd) - 0.5 * LN_2PI
}

/// Relative difference with an absolute floor of `floor`.
#[inline]
pub fn rel_diff(a: f64, b: f64, floor: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
