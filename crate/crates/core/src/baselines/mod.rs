//! Comparison models: a standard HMM and its static variant, a page-level
//! Markov chain and logistic regression.

mod hmm;
mod logreg;
mod markov;


pub use hmm::{
    hmm_exit_scores, hmm_fit, hmm_log_likelihood, hmm_objective_at, hmm_objective_value, static_hmm_fit, HmmFit,
    HmmParams, HmmScorer,
};
pub use logreg::{logreg_fit, logreg_fit_data, logreg_objective, LogisticData, LogisticModel, RIDGE};
pub use markov::{markov_exit_score, markov_fit, MarkovChainParams};
