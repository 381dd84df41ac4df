//! MAP estimation under weakly informative priors.
//!
//! Parameters are optimized on an unconstrained scale (see
//! [`ParamLayout`]); the objective there is the negative log posterior plus
//! the log-Jacobian of the transform. Gradients come from posterior expected
//! counts of the forward/backward pass.

mod fit;
mod objective;
mod prior;
mod sampler;
mod transform;

#[cfg(test)]
mod tests;

pub use fit::{expected_occupancy, fit_map, reorder_states, sample_prior, FitConfig, FitDiagnostics, FitResult, RestartSummary};
pub use objective::{check_gradient, check_gradient_with, neg_log_posterior, neg_log_posterior_with, Objective, PriorMode};
pub use prior::{log_prior, LOGIT_PRIOR_SD, SHAPE_PRIOR_MEAN, SHAPE_PRIOR_SD};
pub use sampler::{sample_posterior_rw, RwChain, RwConfig};
pub use transform::{log_jacobian, ParamLayout, UnconstrainedParams};
