//! Explicit-duration forward algorithm and its reverse pass.
//!
//! `α_t(s, d)` is the probability of the first `t` pages together with a run
//! of state `s` of exact length `d` that ends at step `t`:
//!
//! ```text
//! α_t(s', d') = [Σ_{s ≠ s'} Σ_d α_{t-d'}(s, d) q_{s s'}^d] P(D_{s'} = d') Π_{τ = t-d'+1..t} p_{τ|s'}
//! ```
//!
//! with the bracket replaced by `π_{s'}` when the run starts the session.
//! Runs are bounded by the session length. The *complete* convention sums
//! `α_T`; the *censored* convention lets the last run continue past `T` by
//! using `P(D >= d')` in place of `P(D = d')`, which is the exact probability
//! that the generative process emits the pages as a prefix.

use alloc::vec;
use alloc::vec::Vec;

use super::tables::{DurationTables, EmissionTables};
use crate::error::Result;
use crate::math::{exp, ln, log_add_exp, log_sum_exp};
use crate::model::{ModelParams, Session, UserEmission, PAGE_COUNT};

/// How the final latent run of a sequence is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Convention {
    /// The last run ends exactly at the last observation.
    #[default]
    Complete,
    /// The last run is right-censored by the end of the observations.
    Censored,
}

/// Sums below this are recomputed in log space.
const TINY: f64 = 1e-250;

/// Log-space forward table of one session.
#[derive(Debug, Clone)]
pub struct ForwardTable {
    t: usize,
    k: usize,
    /// `[e][s][d-1]`, 0-based end step `e`.
    log_alpha: Vec<f64>,
    log_likelihood: f64,
}

impl ForwardTable {
    /// Number of steps `T`.
    pub fn len(&self) -> usize {
        self.t
    }

    pub fn is_empty(&self) -> bool {
        self.t == 0
    }

    pub fn states(&self) -> usize {
        self.k
    }

    /// `ln α_t(s, d)` for `1 <= t <= T` and `1 <= d <= t`; `-inf` elsewhere.
    pub fn log_alpha(&self, t: usize, s: usize, d: usize) -> f64 {
        if t == 0 || t > self.t || d == 0 || d > t || s >= self.k {
            return f64::NEG_INFINITY;
        }
        self.log_alpha[((t - 1) * self.k + s) * self.t + d - 1]
    }

    /// Log-likelihood under the convention the table was built with.
    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }
}

/// Reusable buffers for forward/backward passes.
#[derive(Debug, Default)]
pub(crate) struct Workspace {
    pub emis: EmissionTables,
    pub alpha: Vec<f64>,
    pub entry: Vec<f64>,
    h: Vec<f64>,
    f: Vec<f64>,
    occ: Vec<f64>,
    sums: Vec<f64>,
}

/// Expected sufficient statistics of the posterior over latent paths,
/// accumulated across sessions. Their contractions with the partial
/// derivatives of each log-factor give the log-likelihood gradient.
#[derive(Debug, Clone)]
pub(crate) struct Expectations {
    pub max_len: usize,
    pub log_likelihood: f64,
    pub start: Vec<f64>,
    /// `[s][d]` expected number of runs of exact length `d`.
    pub dur_pmf: Vec<f64>,
    /// `[s][d]` expected number of censored final runs of length `d`.
    pub dur_surv: Vec<f64>,
    /// `[s][d][s']` expected transitions after a run of length `d`.
    pub trans: Vec<f64>,
    /// Gradient of the log-likelihood wrt the emission loadings.
    pub grad_intercepts: Vec<f64>,
    pub grad_coefficients: Vec<f64>,
}

impl Expectations {
    pub fn new(params: &ModelParams, max_len: usize) -> Self {
        let k = params.k();
        let w = max_len + 1;
        Self {
            max_len,
            log_likelihood: 0.0,
            start: vec![0.0; k],
            dur_pmf: vec![0.0; k * w],
            dur_surv: vec![0.0; k * w],
            trans: vec![0.0; k * w * k],
            grad_intercepts: vec![0.0; params.emission.intercepts.len()],
            grad_coefficients: vec![0.0; params.emission.coefficients.len()],
        }
    }
}

/// Parameters prepared for evaluating many sessions.
#[derive(Debug, Clone)]
pub struct Evaluator<'p> {
    pub(crate) params: &'p ModelParams,
    pub(crate) tables: DurationTables,
    pub(crate) convention: Convention,
}

impl<'p> Evaluator<'p> {
    /// Prepares tables for sessions of length up to `max_len`.
    pub fn new(params: &'p ModelParams, convention: Convention, max_len: usize) -> Result<Self> {
        params.validate()?;
        Ok(Self::new_unchecked(params, convention, max_len))
    }

    pub(crate) fn new_unchecked(params: &'p ModelParams, convention: Convention, max_len: usize) -> Self {
        Self {
            params,
            tables: DurationTables::new(params, max_len.max(1)),
            convention,
        }
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    fn prepare(&self, session: &Session, ws: &mut Workspace) -> Result<()> {
        session.validate()?;
        if session.len() > self.tables.max_len {
            return Err(crate::Error::Domain(alloc::format!(
                "session of length {} exceeds the prepared bound {}",
                session.len(),
                self.tables.max_len
            )));
        }
        let user: UserEmission = self.params.emission.specialize(&session.demographics)?;
        ws.emis.fill(self.params, &user, session)
    }

    /// Log-likelihood of one session.
    pub fn log_likelihood(&self, session: &Session) -> Result<f64> {
        let mut ws = Workspace::default();
        self.log_likelihood_with(session, &mut ws)
    }

    pub(crate) fn log_likelihood_with(&self, session: &Session, ws: &mut Workspace) -> Result<f64> {
        self.prepare(session, ws)?;
        Ok(forward(&self.tables, &ws.emis, self.convention, &mut ws.alpha, &mut ws.entry, &mut ws.sums))
    }

    /// Forward table of one session.
    pub fn forward_table(&self, session: &Session) -> Result<ForwardTable> {
        let mut ws = Workspace::default();
        let ll = self.log_likelihood_with(session, &mut ws)?;
        Ok(ForwardTable {
            t: session.len(),
            k: self.params.k(),
            log_alpha: ws.alpha,
            log_likelihood: ll,
        })
    }

    /// Adds the session's log-likelihood and posterior expectations to `acc`.
    pub(crate) fn accumulate(&self, session: &Session, ws: &mut Workspace, acc: &mut Expectations) -> Result<f64> {
        self.prepare(session, ws)?;
        let ll = forward(&self.tables, &ws.emis, self.convention, &mut ws.alpha, &mut ws.entry, &mut ws.sums);
        if ll == f64::NEG_INFINITY {
            acc.log_likelihood = f64::NEG_INFINITY;
            return Ok(ll);
        }
        acc.log_likelihood += ll;
        backward(&self.tables, &ws.emis, self.convention, &mut ws.h, &mut ws.f);
        self.collect(session, ws, ll, acc);
        Ok(ll)
    }

    fn collect(&self, session: &Session, ws: &mut Workspace, ll: f64, acc: &mut Expectations) {
        let dt = &self.tables;
        let em = &ws.emis;
        let k = dt.k;
        let t_len = em.t;
        let w = acc.max_len + 1;

        for s in 0..k {
            acc.start[s] += exp(ws.entry[s] + ws.f[s] - ll);
        }

        // runs: (state s, start u, length d)
        ws.occ.clear();
        ws.occ.resize((t_len + 1) * k, 0.0);
        for u in 0..t_len {
            for s in 0..k {
                let lead = ws.entry[u * k + s];
                if lead == f64::NEG_INFINITY {
                    continue;
                }
                let mut run = 0.0;
                for d in 1..=t_len - u {
                    let e = u + d - 1;
                    run += em.obs(e, s);
                    let terminal = e + 1 == t_len;
                    let dur = if terminal && self.convention == Convention::Censored {
                        dt.lsurv(s, d)
                    } else {
                        dt.lpmf(s, d)
                    };
                    let post = exp(lead + dur + run + ws.h[(e * k + s) * t_len + d - 1] - ll);
                    if post == 0.0 {
                        continue;
                    }
                    if terminal && self.convention == Convention::Censored {
                        acc.dur_surv[s * w + d] += post;
                    } else {
                        acc.dur_pmf[s * w + d] += post;
                    }
                    ws.occ[u * k + s] += post;
                    ws.occ[(u + d) * k + s] -= post;
                }
            }
        }

        // transitions at the end of step e into a run starting at e + 1
        // exp(a + lq + f - ll) = exp(a + mf - ll) * q * exp(f - mf)
        let mut scaled = vec![0.0; k];
        for e in 0..t_len.saturating_sub(1) {
            let fnext = &ws.f[(e + 1) * k..(e + 2) * k];
            let mf = fnext.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if mf == f64::NEG_INFINITY {
                continue;
            }
            for s2 in 0..k {
                scaled[s2] = exp(fnext[s2] - mf);
            }
            for s in 0..k {
                for d in 1..=e + 1 {
                    let a = ws.alpha[(e * k + s) * t_len + d - 1];
                    if a == f64::NEG_INFINITY {
                        continue;
                    }
                    let base = (s * w + d) * k;
                    let wa = exp(a + mf - ll);
                    if wa.is_finite() {
                        let q = dt.q_row(s, d);
                        for s2 in 0..k {
                            acc.trans[base + s2] += wa * q[s2] * scaled[s2];
                        }
                    } else {
                        let lq = dt.lq_row(s, d);
                        for s2 in 0..k {
                            if s2 != s {
                                acc.trans[base + s2] += exp(a + lq[s2] + fnext[s2] - ll);
                            }
                        }
                    }
                }
            }
        }

        // emissions: occupancy-weighted logit residuals
        let emission = &self.params.emission;
        let p = emission.covariate_dim();
        let r_dim = emission.demographic_dim;
        let mut occ = vec![0.0; k];
        for t in 0..t_len {
            let o_t = session.pages[t].index();
            let x = &em.features[t * p..(t + 1) * p];
            for s in 0..k {
                occ[s] += ws.occ[t * k + s];
                let weight = occ[s];
                if weight == 0.0 {
                    continue;
                }
                let lp = em.page_log_probs(t, s);
                for o in 0..PAGE_COUNT {
                    let resid = weight * (f64::from(u8::from(o == o_t)) - exp(lp[o]));
                    for (r, &rv) in session.demographics.iter().enumerate() {
                        acc.grad_intercepts[emission.intercept_index(s, o, r)] += resid * rv;
                        if p > 0 {
                            let base = emission.coefficient_index(s, o, 0, r);
                            for (j, &xj) in x.iter().enumerate() {
                                acc.grad_coefficients[base + j * r_dim] += resid * xj * rv;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Fills `alpha` and `entry` and returns the log-likelihood.
pub(crate) fn forward(
    dt: &DurationTables,
    em: &EmissionTables,
    convention: Convention,
    alpha: &mut Vec<f64>,
    entry: &mut Vec<f64>,
    sums: &mut Vec<f64>,
) -> f64 {
    let k = dt.k;
    let t_len = em.t;
    alpha.clear();
    alpha.resize(t_len * k * t_len, f64::NEG_INFINITY);
    entry.clear();
    entry.resize(t_len * k, f64::NEG_INFINITY);
    sums.clear();
    sums.resize(k, 0.0);
    for s in 0..k {
        entry[s] = dt.log_pi[s];
    }
    for e in 0..t_len {
        let mut max_a = f64::NEG_INFINITY;
        for s in 0..k {
            let mut run = 0.0;
            for d in 1..=e + 1 {
                let u = e + 1 - d;
                run += em.obs(u, s);
                let v = entry[u * k + s] + dt.lpmf(s, d) + run;
                alpha[(e * k + s) * t_len + d - 1] = v;
                if v > max_a {
                    max_a = v;
                }
            }
        }
        if e + 1 < t_len {
            let next = &mut entry[(e + 1) * k..(e + 2) * k];
            if max_a == f64::NEG_INFINITY {
                continue;
            }
            sums.iter_mut().for_each(|v| *v = 0.0);
            for s in 0..k {
                for d in 1..=e + 1 {
                    let a = alpha[(e * k + s) * t_len + d - 1];
                    if a == f64::NEG_INFINITY {
                        continue;
                    }
                    let wgt = exp(a - max_a);
                    let q = dt.q_row(s, d);
                    for s2 in 0..k {
                        sums[s2] += wgt * q[s2];
                    }
                }
            }
            for s2 in 0..k {
                next[s2] = if sums[s2] > TINY {
                    max_a + ln(sums[s2])
                } else {
                    // exact log-space fallback for extreme parameters
                    let mut acc = f64::NEG_INFINITY;
                    for s in 0..k {
                        if s == s2 {
                            continue;
                        }
                        for d in 1..=e + 1 {
                            acc = log_add_exp(acc, alpha[(e * k + s) * t_len + d - 1] + dt.lq_row(s, d)[s2]);
                        }
                    }
                    acc
                };
            }
        }
    }
    let mut ll = f64::NEG_INFINITY;
    match convention {
        Convention::Complete => {
            let last = t_len - 1;
            for s in 0..k {
                for d in 1..=t_len {
                    ll = log_add_exp(ll, alpha[(last * k + s) * t_len + d - 1]);
                }
            }
        }
        Convention::Censored => {
            for s in 0..k {
                let mut run = 0.0;
                for d in 1..=t_len {
                    let u = t_len - d;
                    run += em.obs(u, s);
                    ll = log_add_exp(ll, entry[u * k + s] + dt.lsurv(s, d) + run);
                }
            }
        }
    }
    ll
}

/// Fills `h` (`[e][s][d-1]`, log-probability of the observations after `e`
/// given a run of `(s, d)` ends at `e`) and `f` (`[u][s]`, log-probability of
/// the observations from `u` given a run of `s` starts at `u`).
pub(crate) fn backward(dt: &DurationTables, em: &EmissionTables, convention: Convention, h: &mut Vec<f64>, f: &mut Vec<f64>) {
    let k = dt.k;
    let t_len = em.t;
    h.clear();
    h.resize(t_len * k * t_len, f64::NEG_INFINITY);
    f.clear();
    f.resize(t_len * k, f64::NEG_INFINITY);
    let mut scaled = Vec::with_capacity(k);
    let mut terms = Vec::with_capacity(t_len);
    for s in 0..k {
        for d in 1..=t_len {
            h[((t_len - 1) * k + s) * t_len + d - 1] = 0.0;
        }
    }
    for u in (0..t_len).rev() {
        if u + 1 < t_len {
            // h[u] from f[u + 1]
            let fnext = &f[(u + 1) * k..(u + 2) * k];
            let mf = fnext.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            scaled.clear();
            scaled.extend(fnext.iter().map(|&v| exp(v - mf)));
            for s in 0..k {
                for d in 1..=u + 1 {
                    let idx = (u * k + s) * t_len + d - 1;
                    if mf == f64::NEG_INFINITY {
                        h[idx] = f64::NEG_INFINITY;
                        continue;
                    }
                    let q = dt.q_row(s, d);
                    let mut sum = 0.0;
                    for s2 in 0..k {
                        sum += q[s2] * scaled[s2];
                    }
                    h[idx] = if sum > TINY {
                        mf + ln(sum)
                    } else {
                        let lq = dt.lq_row(s, d);
                        let mut acc = f64::NEG_INFINITY;
                        for s2 in 0..k {
                            acc = log_add_exp(acc, lq[s2] + fnext[s2]);
                        }
                        acc
                    };
                }
            }
        }
        for s in 0..k {
            terms.clear();
            let mut run = 0.0;
            for d in 1..=t_len - u {
                let e = u + d - 1;
                run += em.obs(e, s);
                let dur = if e + 1 == t_len && convention == Convention::Censored {
                    dt.lsurv(s, d)
                } else {
                    dt.lpmf(s, d)
                };
                terms.push(dur + run + h[(e * k + s) * t_len + d - 1]);
            }
            f[u * k + s] = log_sum_exp(&terms);
        }
    }
}
