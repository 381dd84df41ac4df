//! Limited-memory BFGS with a strong-Wolfe line search.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::sqrt;

/// Stopping rules and memory size.
#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop when `|f_k - f_{k+1}| <= tol * max(1, |f_k|, |f_{k+1}|)`.
    pub relative_tolerance: f64,
    /// Stop when the Euclidean gradient norm falls below this.
    pub gradient_tolerance: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iterations: 2000,
            relative_tolerance: 1e-8,
            gradient_tolerance: 1e-6,
            max_line_search: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GradientTolerance,
    RelativeTolerance,
    MaxIterations,
    /// No step satisfying the Wolfe conditions was found.
    LineSearchFailed,
    /// The starting point has a non-finite objective or gradient.
    NonFiniteStart,
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub reason: StopReason,
    /// Objective after each accepted iteration, starting with the initial value.
    pub trace: Vec<f64>,
}

impl OptimResult {
    /// True for the two tolerance-based stops.
    pub fn converged(&self) -> bool {
        matches!(self.reason, StopReason::GradientTolerance | StopReason::RelativeTolerance)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    sqrt(dot(a, a))
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;

struct Probe {
    alpha: f64,
    value: f64,
    slope: f64,
}

/// Minimizes `f`, which returns the objective and writes the gradient.
pub fn minimize<F>(mut f: F, x0: &[f64], config: &LbfgsConfig) -> OptimResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut value = f(&x, &mut g);
    let mut evaluations = 1;
    if !value.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return OptimResult {
            x,
            value,
            gradient_norm: f64::INFINITY,
            iterations: 0,
            evaluations,
            reason: StopReason::NonFiniteStart,
            trace: vec![value],
        };
    }
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(config.memory);
    let mut dir = vec![0.0; n];
    let mut alpha_buf = vec![0.0; config.memory];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut iterations = 0;
    let mut reason = StopReason::MaxIterations;
    let mut trace = vec![value];

    while iterations < config.max_iterations {
        let gnorm = norm(&g);
        if gnorm < config.gradient_tolerance {
            reason = StopReason::GradientTolerance;
            break;
        }
        // two-loop recursion
        dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
        for (i, (s, y, rho)) in history.iter().enumerate().rev() {
            let a = rho * dot(s, &dir);
            alpha_buf[i] = a;
            dir.iter_mut().zip(y).for_each(|(d, yi)| *d -= a * yi);
        }
        let scale = match history.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => 1.0 / gnorm.max(1.0),
        };
        dir.iter_mut().for_each(|d| *d *= scale);
        for (i, (s, y, rho)) in history.iter().enumerate() {
            let b = rho * dot(y, &dir);
            let a = alpha_buf[i];
            dir.iter_mut().zip(s).for_each(|(d, si)| *d += (a - b) * si);
        }
        let mut slope0 = dot(&g, &dir);
        if !(slope0 < 0.0) {
            // lost descent: restart from steepest descent
            history.clear();
            dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi / gnorm.max(1.0));
            slope0 = dot(&g, &dir);
        }

        let mut eval = |alpha: f64, x_new: &mut [f64], g_new: &mut [f64]| {
            for i in 0..n {
                x_new[i] = x[i] + alpha * dir[i];
            }
            let v = f(x_new, g_new);
            evaluations += 1;
            let s = dot(g_new, &dir);
            if v.is_finite() && s.is_finite() {
                Probe { alpha, value: v, slope: s }
            } else {
                Probe { alpha, value: f64::INFINITY, slope: f64::NAN }
            }
        };

        let accepted = wolfe_search(
            &mut eval,
            value,
            slope0,
            1.0,
            config.max_line_search,
            &mut x_new,
            &mut g_new,
        );
        let Some(probe) = accepted else {
            if history.is_empty() {
                reason = StopReason::LineSearchFailed;
                break;
            }
            history.clear();
            iterations += 1;
            continue;
        };
        iterations += 1;
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let old = value;
        x.copy_from_slice(&x_new);
        g.copy_from_slice(&g_new);
        value = probe.value;
        trace.push(value);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if history.len() == config.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        if (old - value).abs() <= config.relative_tolerance * old.abs().max(value.abs()).max(1.0) {
            reason = StopReason::RelativeTolerance;
            break;
        }
    }
    OptimResult {
        gradient_norm: norm(&g),
        x,
        value,
        iterations,
        evaluations,
        reason,
        trace,
    }
}

/// Strong-Wolfe line search with bracketing and cubic/bisection zoom. On
/// success `x_new`/`g_new` hold the accepted point.
fn wolfe_search<E>(
    eval: &mut E,
    f0: f64,
    slope0: f64,
    first: f64,
    max_steps: usize,
    x_new: &mut [f64],
    g_new: &mut [f64],
) -> Option<Probe>
where
    E: FnMut(f64, &mut [f64], &mut [f64]) -> Probe,
{
    let mut prev = Probe { alpha: 0.0, value: f0, slope: slope0 };
    let mut alpha = first;
    let mut steps = 0;
    let mut best: Option<(f64, f64)> = None;
    while steps < max_steps {
        steps += 1;
        let cur = eval(alpha, x_new, g_new);
        if !cur.value.is_finite() {
            // shrink into the finite region
            alpha = 0.5 * (prev.alpha + alpha);
            if alpha - prev.alpha < 1e-16 {
                break;
            }
            continue;
        }
        if cur.value < f0 && best.map_or(true, |(_, v)| cur.value < v) {
            best = Some((cur.alpha, cur.value));
        }
        if cur.value > f0 + C1 * cur.alpha * slope0 || (steps > 1 && cur.value >= prev.value) {
            return zoom(eval, f0, slope0, prev, cur, max_steps - steps, x_new, g_new, best);
        }
        if cur.slope.abs() <= -C2 * slope0 {
            return Some(cur);
        }
        if cur.slope >= 0.0 {
            return zoom(eval, f0, slope0, cur, prev, max_steps - steps, x_new, g_new, best);
        }
        prev = cur;
        alpha *= 2.0;
    }
    fallback(eval, best, x_new, g_new)
}

#[allow(clippy::too_many_arguments)]
fn zoom<E>(
    eval: &mut E,
    f0: f64,
    slope0: f64,
    mut lo: Probe,
    mut hi: Probe,
    max_steps: usize,
    x_new: &mut [f64],
    g_new: &mut [f64],
    mut best: Option<(f64, f64)>,
) -> Option<Probe>
where
    E: FnMut(f64, &mut [f64], &mut [f64]) -> Probe,
{
    for _ in 0..max_steps {
        let alpha = interpolate(&lo, &hi);
        let cur = eval(alpha, x_new, g_new);
        if cur.value.is_finite() && cur.value < f0 && best.map_or(true, |(_, v)| cur.value < v) {
            best = Some((cur.alpha, cur.value));
        }
        if !cur.value.is_finite() || cur.value > f0 + C1 * alpha * slope0 || cur.value >= lo.value {
            hi = cur;
        } else {
            if cur.slope.abs() <= -C2 * slope0 {
                return Some(cur);
            }
            if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
        if (hi.alpha - lo.alpha).abs() < 1e-14 * lo.alpha.abs().max(1e-10) {
            break;
        }
    }
    fallback(eval, best, x_new, g_new)
}

/// Accepts the best sufficient-decrease point seen when Wolfe fails.
fn fallback<E>(eval: &mut E, best: Option<(f64, f64)>, x_new: &mut [f64], g_new: &mut [f64]) -> Option<Probe>
where
    E: FnMut(f64, &mut [f64], &mut [f64]) -> Probe,
{
    let (alpha, _) = best?;
    let p = eval(alpha, x_new, g_new);
    p.value.is_finite().then_some(p)
}

/// Minimizer of the cubic through both end points, kept inside the
/// bracket; bisection when the cubic is unusable.
fn interpolate(lo: &Probe, hi: &Probe) -> f64 {
    let (a, b) = (lo.alpha, hi.alpha);
    let mid = 0.5 * (a + b);
    if !hi.value.is_finite() || !hi.slope.is_finite() {
        return mid;
    }
    let d1 = lo.slope + hi.slope - 3.0 * (lo.value - hi.value) / (a - b);
    let disc = d1 * d1 - lo.slope * hi.slope;
    if disc < 0.0 {
        return mid;
    }
    let d2 = sqrt(disc) * if b > a { 1.0 } else { -1.0 };
    let t = b - (b - a) * (hi.slope + d2 - d1) / (hi.slope - lo.slope + 2.0 * d2);
    let (lo_b, hi_b) = if a < b { (a, b) } else { (b, a) };
    let margin = 0.1 * (hi_b - lo_b);
    if t.is_finite() && t > lo_b + margin && t < hi_b - margin {
        t
    } else {
        mid
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64], g: &mut [f64]| {
            let (a, b) = (x[0], x[1]);
            g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            g[1] = 200.0 * (b - a * a);
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
        };
        let cfg = LbfgsConfig { relative_tolerance: 0.0, gradient_tolerance: 1e-10, ..Default::default() };
        let r = minimize(f, &[-1.2, 1.0], &cfg);
        assert!(r.converged(), "{:?}", r.reason);
        assert!((r.x[0] - 1.0).abs() < 1e-7 && (r.x[1] - 1.0).abs() < 1e-7, "{:?}", r.x);
    }

    #[test]
    fn quadratic_in_many_dimensions() {
        let n = 30;
        let f = |x: &[f64], g: &mut [f64]| {
            let mut v = 0.0;
            for i in 0..x.len() {
                let w = (i + 1) as f64;
                v += 0.5 * w * (x[i] - 1.0).powi(2);
                g[i] = w * (x[i] - 1.0);
            }
            v
        };
        let cfg = LbfgsConfig { relative_tolerance: 0.0, gradient_tolerance: 1e-9, ..Default::default() };
        let r = minimize(f, &vec![0.0; n], &cfg);
        assert_eq!(r.reason, StopReason::GradientTolerance);
        assert!(r.x.iter().all(|v| (v - 1.0).abs() < 1e-5));
    }

    #[test]
    fn infinite_region_is_avoided() {
        // -ln x + x has its minimum at 1 and is +inf for x <= 0
        let f = |x: &[f64], g: &mut [f64]| {
            if x[0] <= 0.0 {
                g[0] = f64::NAN;
                return f64::INFINITY;
            }
            g[0] = 1.0 - 1.0 / x[0];
            x[0] - x[0].ln()
        };
        let r = minimize(f, &[20.0], &LbfgsConfig::default());
        assert!((r.x[0] - 1.0).abs() < 1e-4, "{:?}", r);
    }

    #[test]
    fn non_finite_start_is_reported() {
        let r = minimize(|_: &[f64], _: &mut [f64]| f64::NAN, &[0.0], &LbfgsConfig::default());
        assert_eq!(r.reason, StopReason::NonFiniteStart);
    }
}
