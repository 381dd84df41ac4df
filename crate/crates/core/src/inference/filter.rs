//! Elapsed-duration filter for streaming prediction.
//!
//! `φ_t(s, d)` is the joint probability of `o_1..o_t`, `S_t = s` and the
//! current run having lasted `d` steps so far, with the run allowed to go
//! on. Its total mass is the censored prefix likelihood.

use alloc::vec;
use alloc::vec::Vec;

use super::forward::{Convention, Evaluator, Workspace};
use super::tables::DurationTables;
use crate::error::{Error, Result};
use crate::math::{exp, expm1, ln, log1p, log_add_exp, log_sum_exp};
use crate::model::duration::log_survival_raw;
use crate::model::params::log_transition_row;
use crate::model::{CovariateVector, ModelParams, PageCategory, Session, UserEmission, MAX_SESSION_LEN, PAGE_COUNT};

/// Normalized filter table plus the log of its normalizer.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    k: usize,
    t: usize,
    /// `[s][d-1]` for `d = 1..=t`, normalized to sum to one.
    log_phi: Vec<f64>,
    log_mass: f64,
}

impl FilterState {
    /// State before any page has been observed.
    pub fn initial(k: usize) -> Self {
        Self { k, t: 0, log_phi: Vec::new(), log_mass: 0.0 }
    }

    /// Number of pages absorbed so far.
    pub fn steps(&self) -> usize {
        self.t
    }

    pub fn states(&self) -> usize {
        self.k
    }

    /// Log-probability of the observed prefix (censored convention).
    pub fn log_prefix_likelihood(&self) -> f64 {
        self.log_mass
    }

    /// Unnormalized `ln φ_t(s, d)`.
    pub fn log_phi(&self, s: usize, d: usize) -> f64 {
        if d == 0 || d > self.t || s >= self.k {
            return f64::NEG_INFINITY;
        }
        self.log_phi[s * self.t + d - 1] + self.log_mass
    }
}

/// `P(S_t = s | o_1..o_t)`.
pub fn state_posterior(state: &FilterState) -> Result<Vec<f64>> {
    if state.t == 0 || state.log_mass == f64::NEG_INFINITY {
        return Err(Error::ImpossiblePrefix);
    }
    let t = state.t;
    let mut post: Vec<f64> = (0..state.k)
        .map(|s| exp(log_sum_exp(&state.log_phi[s * t..(s + 1) * t])))
        .collect();
    let total: f64 = post.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ImpossiblePrefix);
    }
    post.iter_mut().for_each(|p| *p /= total);
    Ok(post)
}

/// Parameters prepared for filtering the sessions of one user.
#[derive(Debug, Clone)]
pub struct Filter<'p> {
    params: &'p ModelParams,
    tables: DurationTables,
    user: UserEmission,
}

impl<'p> Filter<'p> {
    /// Filter for a user with the given demographic vector.
    pub fn new(params: &'p ModelParams, demographics: &[f64]) -> Result<Self> {
        params.validate()?;
        let user = params.emission.specialize(demographics)?;
        Ok(Self { params, tables: DurationTables::new(params, MAX_SESSION_LEN), user })
    }

    /// Filter for a cold-start user.
    pub fn cold_start(params: &'p ModelParams) -> Result<Self> {
        let mut demo = vec![0.0; params.emission.demographic_dim.max(1)];
        demo[0] = 1.0;
        Self::new(params, &demo)
    }

    pub fn initial_state(&self) -> FilterState {
        FilterState::initial(self.params.k())
    }

    fn check_state(&self, state: &FilterState) -> Result<()> {
        if state.k != self.params.k() {
            return Err(Error::DimensionMismatch {
                field: "filter state",
                expected: self.params.k(),
                found: state.k,
            });
        }
        Ok(())
    }

    fn log_renew_leave(&self, s: usize, d: usize) -> (f64, f64) {
        if d <= self.tables.max_len {
            (self.tables.lrenew(s, d), self.tables.lleave(s, d))
        } else {
            let a = log1p(-self.params.theta[s]);
            let c = self.params.c[s];
            let lr = log_survival_raw(a, c, d + 1) - log_survival_raw(a, c, d);
            (lr, ln(-expm1(lr)))
        }
    }

    fn log_q_row(&self, s: usize, d: usize, buf: &mut [f64]) {
        if d <= self.tables.max_len {
            buf.copy_from_slice(self.tables.lq_row(s, d));
        } else {
            let k = self.params.k();
            log_transition_row(&self.params.mu[s * k..(s + 1) * k], &self.params.delta[s * k..(s + 1) * k], s, d, buf);
        }
    }

    fn page_log_probs(&self, covariates: &CovariateVector) -> Vec<[f64; PAGE_COUNT]> {
        let x = self.params.emission.features(covariates);
        (0..self.params.k())
            .map(|s| {
                let mut buf = [0.0; PAGE_COUNT];
                self.user.log_probs(s, &x, &mut buf);
                buf
            })
            .collect()
    }

    /// Propagates without observing: `[s][d-1]` log-mass of being in `s`
    /// with elapsed duration `d` at the next step, for `d = 1..=t+1`.
    fn propagate(&self, state: &FilterState) -> Vec<f64> {
        let k = state.k;
        let t = state.t;
        let w = t + 1;
        let mut next = vec![f64::NEG_INFINITY; k * w];
        if t == 0 {
            for s in 0..k {
                next[s * w] = ln(self.params.pi[s]);
            }
            return next;
        }
        let mut lq = vec![0.0; k];
        for s in 0..k {
            for d in 1..=t {
                let lp = state.log_phi[s * t + d - 1];
                if lp == f64::NEG_INFINITY {
                    continue;
                }
                let (lr, ll) = self.log_renew_leave(s, d);
                next[s * w + d] = lp + lr;
                self.log_q_row(s, d, &mut lq);
                for s2 in 0..k {
                    if s2 != s {
                        next[s2 * w] = log_add_exp(next[s2 * w], lp + ll + lq[s2]);
                    }
                }
            }
        }
        next
    }

    /// Absorbs the next page.
    pub fn step(&self, state: &FilterState, page: PageCategory, covariates: &CovariateVector) -> Result<FilterState> {
        self.check_state(state)?;
        covariates.validate()?;
        let k = state.k;
        let w = state.t + 1;
        let mut next = self.propagate(state);
        let lp = self.page_log_probs(covariates);
        let o = page.index();
        for s in 0..k {
            for v in &mut next[s * w..(s + 1) * w] {
                *v += lp[s][o];
            }
        }
        let total = log_sum_exp(&next);
        if total == f64::NEG_INFINITY {
            return Err(Error::ImpossiblePrefix);
        }
        next.iter_mut().for_each(|v| *v -= total);
        Ok(FilterState { k, t: w, log_phi: next, log_mass: state.log_mass + total })
    }

    /// Predictive distribution of the next page.
    pub fn predict_next_page(&self, state: &FilterState, covariates: &CovariateVector) -> Result<[f64; PAGE_COUNT]> {
        self.check_state(state)?;
        covariates.validate()?;
        if state.log_mass == f64::NEG_INFINITY {
            return Err(Error::ImpossiblePrefix);
        }
        let k = state.k;
        let w = state.t + 1;
        let next = self.propagate(state);
        let weights: Vec<f64> = (0..k).map(|s| log_sum_exp(&next[s * w..(s + 1) * w])).collect();
        mix_predictive(&weights, &self.page_log_probs(covariates))
    }

    /// Absorbs every page of `session`, returning the final state.
    pub fn run(&self, session: &Session) -> Result<FilterState> {
        let mut state = self.initial_state();
        for (page, cov) in session.pages.iter().zip(&session.covariates) {
            state = self.step(&state, *page, cov)?;
        }
        Ok(state)
    }
}

/// Normalizes `Σ_s exp(weights[s]) p(o|s)` over pages.
fn mix_predictive(log_weights: &[f64], log_probs: &[[f64; PAGE_COUNT]]) -> Result<[f64; PAGE_COUNT]> {
    let m = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return Err(Error::ImpossiblePrefix);
    }
    let mut out = [0.0; PAGE_COUNT];
    for (s, &lw) in log_weights.iter().enumerate() {
        let wgt = exp(lw - m);
        for (slot, &lp) in out.iter_mut().zip(log_probs[s].iter()) {
            *slot += wgt * exp(lp);
        }
    }
    let total: f64 = out.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ImpossiblePrefix);
    }
    out.iter_mut().for_each(|p| *p /= total);
    Ok(out)
}

/// `filter_step` for a cold-start user.
pub fn filter_step(
    params: &ModelParams,
    state: &FilterState,
    page: PageCategory,
    covariates: &CovariateVector,
) -> Result<FilterState> {
    Filter::cold_start(params)?.step(state, page, covariates)
}

/// `predict_next_page` for a cold-start user.
pub fn predict_next_page(
    params: &ModelParams,
    state: &FilterState,
    covariates: &CovariateVector,
) -> Result<[f64; PAGE_COUNT]> {
    Filter::cold_start(params)?.predict_next_page(state, covariates)
}

/// One step of a prediction trace.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionStep {
    /// 1-based step index `t`.
    pub step: usize,
    /// `P(O_t = Exit | o_1..o_{t-1})`.
    pub exit_prob: f64,
    /// Full predictive simplex of `O_t`.
    pub predictive: [f64; PAGE_COUNT],
    /// `P(S_t | o_1..o_t)`.
    pub state_posterior: Vec<f64>,
    /// `ln P(o_1..o_t)`.
    pub log_prefix_likelihood: f64,
}

/// Per-step one-step-ahead predictions for a session.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTrace {
    pub session_id: alloc::string::String,
    pub steps: Vec<PredictionStep>,
}

/// Prediction trace of one session.
///
/// Under [`Convention::Censored`] this equals running [`Filter`] over the
/// session. Under [`Convention::Complete`] the predictive at step `t` is the
/// ratio of complete likelihoods `L(o_1..o_{t-1} o) / Σ_o' L(o_1..o_{t-1} o')`.
pub fn prediction_trace(params: &ModelParams, session: &Session, convention: Convention) -> Result<PredictionTrace> {
    let eval = Evaluator::new(params, convention, session.len())?;
    let mut ws = Workspace::default();
    prediction_trace_with(&eval, session, &mut ws)
}

pub(crate) fn prediction_trace_with(eval: &Evaluator<'_>, session: &Session, ws: &mut Workspace) -> Result<PredictionTrace> {
    eval.log_likelihood_with(session, ws)?;
    let dt = &eval.tables;
    let em = &ws.emis;
    let k = dt.k;
    let t_len = em.t;
    let mut steps = Vec::with_capacity(t_len);
    let mut before = vec![0.0; k];
    let mut after = vec![0.0; k];
    let mut lp = vec![[0.0; PAGE_COUNT]; k];
    for e in 0..t_len {
        for s in 0..k {
            let mut b = f64::NEG_INFINITY;
            let mut a = f64::NEG_INFINITY;
            let mut run = 0.0;
            for d in 1..=e + 1 {
                let u = e + 1 - d;
                if d > 1 {
                    // emissions of steps u..e-1 already seen
                    run += em.obs(u, s);
                }
                let dur = match eval.convention {
                    Convention::Complete => dt.lpmf(s, d),
                    Convention::Censored => dt.lsurv(s, d),
                };
                let lead = ws.entry[u * k + s] + dur + run;
                b = log_add_exp(b, lead);
                a = log_add_exp(a, lead + em.obs(e, s));
            }
            before[s] = b;
            after[s] = a;
            lp[s].copy_from_slice(em.page_log_probs(e, s));
        }
        let predictive = mix_predictive(&before, &lp)?;
        let log_prefix = log_sum_exp(&after);
        if log_prefix == f64::NEG_INFINITY {
            return Err(Error::ImpossiblePrefix);
        }
        let posterior = after.iter().map(|&v| exp(v - log_prefix)).collect();
        steps.push(PredictionStep {
            step: e + 1,
            exit_prob: predictive[PageCategory::Exit.index()],
            predictive,
            state_posterior: posterior,
            log_prefix_likelihood: log_prefix,
        });
    }
    Ok(PredictionTrace { session_id: session.session_id.clone(), steps })
}
