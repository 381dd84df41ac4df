//! First-order Markov chain over page categories.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Result;
use crate::metrics::ExitScorer;
use crate::model::{PageCategory, Session, PAGE_COUNT};

/// Initial distribution and row-stochastic transitions between pages.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChainParams {
    pub initial: [f64; PAGE_COUNT],
    /// `transitions[from][to]`.
    pub transitions: [[f64; PAGE_COUNT]; PAGE_COUNT],
}

/// Add-one smoothed counts of first pages and page-to-page moves.
pub fn markov_fit(sessions: &[Session]) -> MarkovChainParams {
    let mut initial = [1.0; PAGE_COUNT];
    let mut transitions = [[1.0; PAGE_COUNT]; PAGE_COUNT];
    for s in sessions {
        if let Some(first) = s.pages.first() {
            initial[first.index()] += 1.0;
        }
        for w in s.pages.windows(2) {
            transitions[w[0].index()][w[1].index()] += 1.0;
        }
    }
    let normalize = |row: &mut [f64; PAGE_COUNT]| {
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= total);
    };
    normalize(&mut initial);
    transitions.iter_mut().for_each(normalize);
    MarkovChainParams { initial, transitions }
}

/// Probability that the page after `prefix` is Exit.
pub fn markov_exit_score(params: &MarkovChainParams, prefix: &[PageCategory]) -> f64 {
    let exit = PageCategory::Exit.index();
    match prefix.last() {
        Some(p) => params.transitions[p.index()][exit],
        None => params.initial[exit],
    }
}

impl ExitScorer for MarkovChainParams {
    fn name(&self) -> String {
        "Markov chain".into()
    }

    fn exit_scores(&self, session: &Session) -> Result<Vec<f64>> {
        Ok((0..session.len()).map(|t| markov_exit_score(self, &session.pages[..t])).collect())
    }
}
