use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{exp, expm1, ln, log1p};
use crate::model::duration::{log_pmf_raw, log_survival_raw};
use crate::model::params::log_transition_row;
use crate::model::{ModelParams, Session, UserEmission, PAGE_COUNT};

/// Duration and transition tables shared by every session evaluated under
/// one parameter vector, for run lengths `1..=max_len`.
#[derive(Debug, Clone)]
pub(crate) struct DurationTables {
    pub k: usize,
    pub max_len: usize,
    pub log_pi: Vec<f64>,
    /// `[s][d]`, `d = 0..=max_len` (index 0 unused).
    pub log_pmf: Vec<f64>,
    pub log_surv: Vec<f64>,
    /// `ln ρ_s(d)` and `ln(1 - ρ_s(d))` for the pmf-consistent renewal.
    pub log_renew: Vec<f64>,
    pub log_leave: Vec<f64>,
    /// `[s][d][s']` log transition probabilities.
    pub log_q: Vec<f64>,
    pub q: Vec<f64>,
}

impl DurationTables {
    pub fn new(params: &ModelParams, max_len: usize) -> Self {
        let k = params.k();
        let w = max_len + 1;
        let mut log_pmf = vec![f64::NEG_INFINITY; k * w];
        let mut log_surv = vec![0.0; k * (w + 1)];
        let mut log_renew = vec![0.0; k * w];
        let mut log_leave = vec![0.0; k * w];
        let mut log_q = vec![f64::NEG_INFINITY; k * w * k];
        let mut q = vec![0.0; k * w * k];
        for s in 0..k {
            let a = log1p(-params.theta[s]);
            let c = params.c[s];
            for d in 1..=max_len + 1 {
                log_surv[s * (w + 1) + d] = log_survival_raw(a, c, d);
            }
            for d in 1..=max_len {
                log_pmf[s * w + d] = log_pmf_raw(a, c, d);
                let lr = log_surv[s * (w + 1) + d + 1] - log_surv[s * (w + 1) + d];
                log_renew[s * w + d] = lr;
                log_leave[s * w + d] = ln(-expm1(lr));
                let row = &mut log_q[(s * w + d) * k..(s * w + d + 1) * k];
                log_transition_row(&params.mu[s * k..(s + 1) * k], &params.delta[s * k..(s + 1) * k], s, d, row);
                for (dst, &src) in q[(s * w + d) * k..(s * w + d + 1) * k].iter_mut().zip(row.iter()) {
                    *dst = exp(src);
                }
            }
        }
        let log_pi = params.pi.iter().map(|&p| ln(p)).collect();
        Self { k, max_len, log_pi, log_pmf, log_surv, log_renew, log_leave, log_q, q }
    }

    #[inline]
    pub fn lpmf(&self, s: usize, d: usize) -> f64 {
        self.log_pmf[s * (self.max_len + 1) + d]
    }

    #[inline]
    pub fn lsurv(&self, s: usize, d: usize) -> f64 {
        self.log_surv[s * (self.max_len + 2) + d]
    }

    #[inline]
    pub fn lrenew(&self, s: usize, d: usize) -> f64 {
        self.log_renew[s * (self.max_len + 1) + d]
    }

    #[inline]
    pub fn lleave(&self, s: usize, d: usize) -> f64 {
        self.log_leave[s * (self.max_len + 1) + d]
    }

    #[inline]
    pub fn lq_row(&self, s: usize, d: usize) -> &[f64] {
        let base = (s * (self.max_len + 1) + d) * self.k;
        &self.log_q[base..base + self.k]
    }

    #[inline]
    pub fn q_row(&self, s: usize, d: usize) -> &[f64] {
        let base = (s * (self.max_len + 1) + d) * self.k;
        &self.q[base..base + self.k]
    }
}

/// Per-session emission tables: log-probabilities of every page at every
/// step for every state.
#[derive(Debug, Clone, Default)]
pub(crate) struct EmissionTables {
    pub t: usize,
    pub k: usize,
    /// `[t][s][o]`.
    pub log_probs: Vec<f64>,
    /// `[t][s]`: log-emission of the observed page.
    pub observed: Vec<f64>,
    /// `[t][j]` selected covariate features.
    pub features: Vec<f64>,
}

impl EmissionTables {
    pub fn fill(&mut self, params: &ModelParams, user: &UserEmission, session: &Session) -> Result<()> {
        let k = params.k();
        let t_len = session.len();
        if session.covariates.len() != t_len {
            return Err(Error::DimensionMismatch {
                field: "covariates",
                expected: t_len,
                found: session.covariates.len(),
            });
        }
        let p = params.emission.covariate_dim();
        self.t = t_len;
        self.k = k;
        self.log_probs.clear();
        self.log_probs.resize(t_len * k * PAGE_COUNT, 0.0);
        self.observed.clear();
        self.observed.resize(t_len * k, 0.0);
        self.features.clear();
        self.features.reserve(t_len * p);
        for cov in &session.covariates {
            for &kind in &params.emission.covariates {
                self.features.push(cov.get(kind));
            }
        }
        let mut buf = [0.0; PAGE_COUNT];
        for t in 0..t_len {
            let x = &self.features[t * p..(t + 1) * p];
            let o = session.pages[t].index();
            for s in 0..k {
                user.log_probs(s, x, &mut buf);
                self.log_probs[(t * k + s) * PAGE_COUNT..(t * k + s + 1) * PAGE_COUNT].copy_from_slice(&buf);
                self.observed[t * k + s] = buf[o];
            }
        }
        Ok(())
    }

    #[inline]
    pub fn obs(&self, t: usize, s: usize) -> f64 {
        self.observed[t * self.k + s]
    }

    #[inline]
    pub fn page_log_probs(&self, t: usize, s: usize) -> &[f64] {
        let base = (t * self.k + s) * PAGE_COUNT;
        &self.log_probs[base..base + PAGE_COUNT]
    }
}
