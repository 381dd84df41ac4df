//! Exact likelihoods, filtering and one-step-ahead prediction.

mod filter;
mod forward;
pub(crate) mod tables;


pub use filter::{
    filter_step, predict_next_page, prediction_trace, state_posterior, Filter, FilterState, PredictionStep,
    PredictionTrace,
};
pub(crate) use filter::prediction_trace_with;
pub use forward::{Convention, Evaluator, ForwardTable};
pub(crate) use forward::{Expectations, Workspace};

use crate::error::Result;
use crate::model::{ModelParams, Session};

/// `ln P(o_1..o_T)` with the last run ending exactly at `T`.
pub fn log_likelihood_complete(params: &ModelParams, session: &Session) -> Result<f64> {
    log_likelihood(params, session, Convention::Complete)
}

/// `ln P(o_1..o_T)` with the last run right-censored at `T`.
pub fn log_likelihood_censored(params: &ModelParams, session: &Session) -> Result<f64> {
    log_likelihood(params, session, Convention::Censored)
}

pub fn log_likelihood(params: &ModelParams, session: &Session, convention: Convention) -> Result<f64> {
    Evaluator::new(params, convention, session.len())?.log_likelihood(session)
}

/// Forward table under the complete convention.
pub fn forward_table(params: &ModelParams, session: &Session) -> Result<ForwardTable> {
    Evaluator::new(params, Convention::Complete, session.len())?.forward_table(session)
}
