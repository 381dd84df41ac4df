use crate::math::{ln, normal_log_pdf};
use crate::model::ModelParams;

/// Standard deviation of the normal priors on logits.
pub const LOGIT_PRIOR_SD: f64 = 5.0;
/// Mean and standard deviation of the normal prior on `c`.
pub const SHAPE_PRIOR_MEAN: f64 = 1.0;
pub const SHAPE_PRIOR_SD: f64 = 1.0;

/// Log prior density on the constrained scale: Dirichlet(1) on `π`,
/// Uniform(0, 1) on `θ`, Normal(1, 1) on `c` and Normal(0, 5²) on every
/// off-diagonal `μ`, `δ` and every emission loading. Out of support gives
/// `-inf`.
pub fn log_prior(params: &ModelParams) -> f64 {
    let k = params.k();
    let pi_sum: f64 = params.pi.iter().sum();
    if params.pi.iter().any(|&p| !(p >= 0.0)) || (pi_sum - 1.0).abs() > 1e-9 {
        return f64::NEG_INFINITY;
    }
    if params.theta.iter().any(|&t| !(t > 0.0 && t < 1.0)) || params.c.iter().any(|&c| !(c > 0.0)) {
        return f64::NEG_INFINITY;
    }
    // Dirichlet(1, ..., 1) density is (K - 1)!
    let mut total: f64 = (1..k).map(|i| ln(i as f64)).sum();
    for &c in &params.c {
        total += normal_log_pdf(c, SHAPE_PRIOR_MEAN, SHAPE_PRIOR_SD);
    }
    for s in 0..k {
        for j in 0..k {
            if s != j {
                total += normal_log_pdf(params.mu[s * k + j], 0.0, LOGIT_PRIOR_SD);
                total += normal_log_pdf(params.delta[s * k + j], 0.0, LOGIT_PRIOR_SD);
            }
        }
    }
    for &v in params.emission.intercepts.iter().chain(&params.emission.coefficients) {
        total += normal_log_pdf(v, 0.0, LOGIT_PRIOR_SD);
    }
    total
}
