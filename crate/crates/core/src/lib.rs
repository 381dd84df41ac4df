//! Duration-dependent hidden semi-Markov models (DDHMM) for discrete event
//! sequences with covariates.
//!
//! A session is an ordered list of page categories. A latent state persists
//! for a discrete-Weibull distributed number of steps, emits pages through a
//! covariate-driven multinomial logit, and then jumps to a *different* state
//! with probabilities that depend on how long the run lasted.
//!
//! The crate is `no_std` (it needs `alloc`) and carries no IO. It provides:
//!
//! - [`model`]: page alphabet, sessions, parameters and the four probability
//!   primitives (emissions, durations, renewals, transitions).
//! - [`inference`]: the explicit-duration forward algorithm (complete and
//!   right-censored conventions), its reverse pass for gradients, and a
//!   streaming elapsed-duration filter for one-step-ahead exit prediction.
//! - [`estimation`]: MAP fitting with L-BFGS over an unconstrained
//!   reparameterization, label ordering, gradient checks and a random-walk
//!   Metropolis sampler.
//! - [`simulation`]: the generative sampler, the parameter-recovery
//!   experiment and the dynamic-targeting case study.
//! - [`baselines`]: standard and static HMMs, a first-order Markov chain and
//!   logistic regression.
//! - [`metrics`]: AUROC, AUPRC, hit rate at a fixed false-positive rate, the
//!   time-ordered split and K selection.
#![cfg_attr(not(test), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod baselines;
pub mod error;
pub mod estimation;
pub mod inference;
pub mod math;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod simulation;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use model::{
    CovariateKind, CovariateVector, EmissionParams, ModelParams, PageCategory, Session,
    PAGE_COUNT,
};
