//! Domain types and the probability primitives of the DDHMM.

pub mod covariates;
pub mod duration;
pub mod emission;
pub mod page;
pub mod params;
pub mod session;

pub use covariates::{align_to_weekend, compute_covariates, is_weekend, CovariateKind, CovariateTracker, CovariateVector};
pub use duration::{
    duration_log_pmf, duration_pmf, duration_survival, expected_duration, log_renewal_probability_consistent,
    log_renewal_probability_published, renewal_probability_consistent, renewal_probability_published, sample_duration,
};
pub use emission::{EmissionParams, UserEmission};
pub use page::{PageCategory, PAGE_COUNT};
pub use params::{emission_probs, emission_probs_features, transition_probs, ModelParams};
pub use session::{within_length_bounds, Session, MAX_SESSION_LEN, MIN_SESSION_LEN};
