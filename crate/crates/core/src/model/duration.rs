//! Discrete Weibull state durations.
//!
//! `P(D = d) = (1-θ)^((d-1)^c) - (1-θ)^(d^c)` for `d >= 1`, `0 < θ < 1`,
//! `c > 0`. Everything is computed from `a = ln(1-θ)` so that tails stay
//! accurate; `c = 1` is the geometric law with success probability `θ`.

use rand::Rng;

use crate::error::{domain, Result};
use crate::math::{exp, expm1, ln, log1p, pow};

/// Default truncation tolerance for duration series.
pub const SERIES_TOLERANCE: f64 = 1e-12;
/// Hard cap on the number of series terms.
pub const SERIES_CAP: usize = 1_000_000;

pub(crate) fn check(theta: f64, c: f64) -> Result<()> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(domain(alloc::format!("theta must lie in (0, 1), got {theta}")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(domain(alloc::format!("c must be positive and finite, got {c}")));
    }
    Ok(())
}

fn check_d(theta: f64, c: f64, d: usize) -> Result<()> {
    check(theta, c)?;
    if d == 0 {
        return Err(domain("duration must be at least 1"));
    }
    Ok(())
}

#[inline]
fn powc(d: usize, c: f64) -> f64 {
    match d {
        0 => 0.0,
        1 => 1.0,
        _ => pow(d as f64, c),
    }
}

/// `ln P(D >= d)`; unchecked.
#[inline]
pub(crate) fn log_survival_raw(a: f64, c: f64, d: usize) -> f64 {
    if d <= 1 {
        0.0
    } else {
        a * powc(d - 1, c)
    }
}

/// `ln P(D = d)`; unchecked.
#[inline]
pub(crate) fn log_pmf_raw(a: f64, c: f64, d: usize) -> f64 {
    let x = powc(d - 1, c);
    let gap = powc(d, c) - x;
    a * x + ln(-expm1(a * gap))
}

/// `P(D = d | θ, c)`.
pub fn duration_pmf(theta: f64, c: f64, d: usize) -> Result<f64> {
    check_d(theta, c, d)?;
    Ok(exp(log_pmf_raw(log1p(-theta), c, d)))
}

/// `ln P(D = d | θ, c)`.
pub fn duration_log_pmf(theta: f64, c: f64, d: usize) -> Result<f64> {
    check_d(theta, c, d)?;
    Ok(log_pmf_raw(log1p(-theta), c, d))
}

/// `P(D >= d | θ, c) = (1-θ)^((d-1)^c)`.
pub fn duration_survival(theta: f64, c: f64, d: usize) -> Result<f64> {
    check_d(theta, c, d)?;
    Ok(exp(log_survival_raw(log1p(-theta), c, d)))
}

/// Renewal probability in its published closed form,
/// `(1-θ)^((d+1)^c - d^c)`.
pub fn renewal_probability_published(theta: f64, c: f64, d: usize) -> Result<f64> {
    log_renewal_probability_published(theta, c, d).map(exp)
}

/// Natural log of [`renewal_probability_published`]; finite where the
/// probability itself underflows.
pub fn log_renewal_probability_published(theta: f64, c: f64, d: usize) -> Result<f64> {
    check_d(theta, c, d)?;
    Ok(log1p(-theta) * (powc(d + 1, c) - powc(d, c)))
}

/// `P(D >= d+1 | D >= d) = (1-θ)^(d^c - (d-1)^c)`, the continuation
/// probability implied by [`duration_pmf`]. The filter and sampler use this
/// form.
pub fn renewal_probability_consistent(theta: f64, c: f64, d: usize) -> Result<f64> {
    log_renewal_probability_consistent(theta, c, d).map(exp)
}

/// Natural log of [`renewal_probability_consistent`].
pub fn log_renewal_probability_consistent(theta: f64, c: f64, d: usize) -> Result<f64> {
    check_d(theta, c, d)?;
    Ok(log1p(-theta) * (powc(d, c) - powc(d - 1, c)))
}

/// `E[D] = Σ d P(D = d)`, truncated once the survival mass falls below
/// `tolerance`.
pub fn expected_duration(theta: f64, c: f64, tolerance: f64) -> Result<f64> {
    check(theta, c)?;
    if !(tolerance > 0.0) {
        return Err(domain("tolerance must be positive"));
    }
    let a = log1p(-theta);
    let mut mean = 0.0;
    for d in 1..=SERIES_CAP {
        mean += d as f64 * exp(log_pmf_raw(a, c, d));
        if exp(log_survival_raw(a, c, d + 1)) < tolerance {
            return Ok(mean);
        }
    }
    Err(crate::Error::Numerical(alloc::format!(
        "duration series for theta={theta}, c={c} did not converge within {SERIES_CAP} terms"
    )))
}

/// Draws a duration, capped at `cap`.
///
/// Uses `D = floor(Y^(1/c)) + 1` with `Y ~ Exp(-ln(1-θ))`, which has
/// survival function exactly `(1-θ)^((d-1)^c)`.
pub fn sample_duration<R: Rng + ?Sized>(theta: f64, c: f64, cap: usize, rng: &mut R) -> usize {
    let a = log1p(-theta);
    let u: f64 = 1.0 - rng.random::<f64>();
    let y = ln(u) / a;
    let scaled = pow(y, 1.0 / c);
    if !(scaled < cap as f64) {
        return cap;
    }
    (scaled as usize + 1).min(cap)
}

/// Log-density and its partials with respect to `a = ln(1-θ)` and `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LogGrad {
    pub value: f64,
    pub da: f64,
    pub dc: f64,
}

#[inline]
fn powc_and_dc(d: usize, c: f64) -> (f64, f64) {
    if d <= 1 {
        return (if d == 1 { 1.0 } else { 0.0 }, 0.0);
    }
    let v = pow(d as f64, c);
    (v, v * ln(d as f64))
}

pub(crate) fn log_pmf_grad(a: f64, c: f64, d: usize) -> LogGrad {
    let (x, dx) = powc_and_dc(d - 1, c);
    let (y, dy) = powc_and_dc(d, c);
    let gap = y - x;
    let dgap = dy - dx;
    // r / (1 - r) with r = exp(a * gap), the renewal probability
    let odds = 1.0 / expm1(-a * gap);
    LogGrad {
        value: a * x + ln(-expm1(a * gap)),
        da: x - gap * odds,
        dc: a * dx - a * dgap * odds,
    }
}

pub(crate) fn log_survival_grad(a: f64, c: f64, d: usize) -> LogGrad {
    let (x, dx) = powc_and_dc(d.saturating_sub(1), c);
    if d <= 1 {
        return LogGrad { value: 0.0, da: 0.0, dc: 0.0 };
    }
    LogGrad {
        value: a * x,
        da: x,
        dc: a * dx,
    }
}
