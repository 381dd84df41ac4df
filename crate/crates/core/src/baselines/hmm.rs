//! Standard hidden Markov model with the same emission component, and its
//! static variant without transitions.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal};

use crate::error::{Error, Result};
use crate::estimation::{FitConfig, LOGIT_PRIOR_SD};
use crate::math::{exp, ln, normal_log_pdf, softmax_in_place};
use crate::metrics::ExitScorer;
use crate::model::params::log_transition_row;
use crate::model::{EmissionParams, ModelParams, PageCategory, Session, UserEmission, PAGE_COUNT};
use crate::optim::{minimize, LbfgsConfig, StopReason};

/// HMM parameters; `a` is `K x K` row-major and may have a diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmParams {
    pub pi: Vec<f64>,
    pub a: Vec<f64>,
    pub emission: EmissionParams,
}

fn is_simplex(v: &[f64]) -> bool {
    v.iter().all(|&p| p >= 0.0 && p.is_finite()) && (v.iter().sum::<f64>() - 1.0).abs() <= 1e-12
}

impl HmmParams {
    pub fn k(&self) -> usize {
        self.pi.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k == 0 {
            return Err(Error::ModelStructure("an HMM needs at least one state".into()));
        }
        if self.a.len() != k * k {
            return Err(Error::DimensionMismatch { field: "a", expected: k * k, found: self.a.len() });
        }
        if self.emission.k != k {
            return Err(Error::DimensionMismatch { field: "emission", expected: k, found: self.emission.k });
        }
        if !is_simplex(&self.pi) {
            return Err(Error::Domain("pi must be a probability simplex".into()));
        }
        for s in 0..k {
            if !is_simplex(&self.a[s * k..(s + 1) * k]) {
                return Err(Error::Domain(format!("row {} of the transition matrix is not a simplex", s + 1)));
            }
        }
        self.emission.validate()
    }

    /// The HMM a DDHMM reduces to when `c = 1` and `δ = 0`:
    /// `a_ss = 1 - θ_s` and `a_ss' = θ_s q_ss'`.
    pub fn from_ddhmm(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        if params.c.iter().any(|&c| c != 1.0) || params.delta.iter().enumerate().any(|(i, &d)| i / params.k() != i % params.k() && d != 0.0) {
            return Err(Error::ModelStructure("the reduction needs c = 1 and delta = 0 in every state".into()));
        }
        let k = params.k();
        let mut a = vec![0.0; k * k];
        let mut row = vec![0.0; k];
        for s in 0..k {
            log_transition_row(&params.mu[s * k..(s + 1) * k], &params.delta[s * k..(s + 1) * k], s, 1, &mut row);
            for j in 0..k {
                a[s * k + j] = if j == s { 1.0 - params.theta[s] } else { params.theta[s] * exp(row[j]) };
            }
        }
        Ok(Self { pi: params.pi.clone(), a, emission: params.emission.clone() })
    }

    /// Identity transitions.
    pub fn is_static(&self) -> bool {
        let k = self.k();
        (0..k * k).all(|i| self.a[i] == if i / k == i % k { 1.0 } else { 0.0 })
    }
}

fn emission_table(emission: &EmissionParams, user: &UserEmission, session: &Session) -> Vec<[f64; PAGE_COUNT]> {
    let k = emission.k;
    let mut out = Vec::with_capacity(session.len() * k);
    for cov in &session.covariates {
        let x = emission.features(cov);
        for s in 0..k {
            let mut buf = [0.0; PAGE_COUNT];
            user.log_probs(s, &x, &mut buf);
            out.push(buf);
        }
    }
    out
}

/// Scaled forward pass: normalized filtered distributions per step and the
/// log-likelihood.
fn forward(params: &HmmParams, lp: &[[f64; PAGE_COUNT]], pages: &[PageCategory]) -> (Vec<f64>, Vec<f64>, f64) {
    let k = params.k();
    let t_len = pages.len();
    let mut alpha = vec![0.0; t_len * k];
    let mut scale = vec![0.0; t_len];
    let mut ll = 0.0;
    let mut pred = vec![0.0; k];
    for t in 0..t_len {
        if t == 0 {
            pred.copy_from_slice(&params.pi);
        } else {
            pred.iter_mut().for_each(|v| *v = 0.0);
            for s in 0..k {
                let w = alpha[(t - 1) * k + s];
                for j in 0..k {
                    pred[j] += w * params.a[s * k + j];
                }
            }
        }
        let o = pages[t].index();
        // shift by the largest log-emission to avoid underflow
        let m = (0..k).map(|s| lp[t * k + s][o]).fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for s in 0..k {
            let v = pred[s] * exp(lp[t * k + s][o] - m);
            alpha[t * k + s] = v;
            total += v;
        }
        if !(total > 0.0) {
            return (alpha, scale, f64::NEG_INFINITY);
        }
        alpha[t * k..(t + 1) * k].iter_mut().for_each(|v| *v /= total);
        scale[t] = total;
        ll += ln(total) + m;
    }
    (alpha, scale, ll)
}

/// `ln P(o_1..o_T)` by the standard forward recursion.
pub fn hmm_log_likelihood(params: &HmmParams, session: &Session) -> Result<f64> {
    params.validate()?;
    session.validate()?;
    let user = params.emission.specialize(&session.demographics)?;
    let lp = emission_table(&params.emission, &user, session);
    Ok(forward(params, &lp, &session.pages).2)
}

/// `P(O_t = Exit | o_1..o_{t-1})` for every step.
pub fn hmm_exit_scores(params: &HmmParams, session: &Session) -> Result<Vec<f64>> {
    params.validate()?;
    session.validate()?;
    let k = params.k();
    let user = params.emission.specialize(&session.demographics)?;
    let lp = emission_table(&params.emission, &user, session);
    let (alpha, _, _) = forward(params, &lp, &session.pages);
    let exit = PageCategory::Exit.index();
    let mut out = Vec::with_capacity(session.len());
    for t in 0..session.len() {
        let mut score = 0.0;
        for j in 0..k {
            let w = if t == 0 {
                params.pi[j]
            } else {
                (0..k).map(|s| alpha[(t - 1) * k + s] * params.a[s * k + j]).sum()
            };
            score += w * exp(lp[t * k + j][exit]);
        }
        out.push(score);
    }
    Ok(out)
}

/// Exit scorer backed by an HMM.
#[derive(Debug, Clone)]
pub struct HmmScorer {
    pub params: HmmParams,
    pub label: String,
}

impl ExitScorer for HmmScorer {
    fn name(&self) -> String {
        self.label.clone()
    }
    fn states(&self) -> Option<usize> {
        Some(self.params.k())
    }
    fn exit_scores(&self, session: &Session) -> Result<Vec<f64>> {
        hmm_exit_scores(&self.params, session)
    }
}

/// Unconstrained coordinates: `π` and each row of `A` as softmax logits
/// with the first entry pinned (rows omitted for the static model), then
/// the emission loadings.
#[derive(Debug, Clone)]
struct HmmLayout {
    k: usize,
    fixed_identity: bool,
    template: EmissionParams,
}

impl HmmLayout {
    fn a_len(&self) -> usize {
        if self.fixed_identity {
            0
        } else {
            self.k * (self.k - 1)
        }
    }

    fn len(&self) -> usize {
        (self.k - 1) + self.a_len() + self.template.intercepts.len() + self.template.coefficients.len()
    }

    fn unpack(&self, z: &[f64]) -> HmmParams {
        let k = self.k;
        let mut pi = vec![0.0; k];
        pi[1..].copy_from_slice(&z[..k - 1]);
        softmax_in_place(&mut pi);
        let mut a = vec![0.0; k * k];
        if self.fixed_identity {
            (0..k).for_each(|s| a[s * k + s] = 1.0);
        } else {
            for s in 0..k {
                let row = &mut a[s * k..(s + 1) * k];
                row[1..].copy_from_slice(&z[k - 1 + s * (k - 1)..k - 1 + (s + 1) * (k - 1)]);
                row[0] = 0.0;
                softmax_in_place(row);
            }
        }
        let e0 = k - 1 + self.a_len();
        let ni = self.template.intercepts.len();
        let mut emission = self.template.clone();
        emission.intercepts.copy_from_slice(&z[e0..e0 + ni]);
        emission.coefficients.copy_from_slice(&z[e0 + ni..]);
        HmmParams { pi, a, emission }
    }

    fn pack(&self, p: &HmmParams) -> Vec<f64> {
        let k = self.k;
        let mut z = Vec::with_capacity(self.len());
        z.extend(p.pi[1..].iter().map(|&v| ln(v) - ln(p.pi[0])));
        if !self.fixed_identity {
            for s in 0..k {
                let row = &p.a[s * k..(s + 1) * k];
                z.extend(row[1..].iter().map(|&v| ln(v) - ln(row[0])));
            }
        }
        z.extend_from_slice(&p.emission.intercepts);
        z.extend_from_slice(&p.emission.coefficients);
        z
    }
}

/// Negative log posterior of an HMM and its gradient: Dirichlet(1) on `π`
/// and every row of `A`, Normal(0, 5²) on emission loadings, plus the
/// softmax log-Jacobians.
fn hmm_objective(layout: &HmmLayout, sessions: &[Session], z: &[f64], grad: &mut [f64]) -> f64 {
    let k = layout.k;
    let params = layout.unpack(z);
    grad.iter_mut().for_each(|g| *g = 0.0);
    if params.pi.iter().chain(&params.a).any(|v| !v.is_finite()) {
        grad.iter_mut().for_each(|g| *g = f64::NAN);
        return f64::INFINITY;
    }
    let e0 = k - 1 + layout.a_len();
    let ni = layout.template.intercepts.len();
    let mut ll = 0.0;
    let mut start = vec![0.0; k];
    let mut xi = vec![0.0; k * k];
    for session in sessions {
        let Ok(user) = params.emission.specialize(&session.demographics) else {
            return f64::INFINITY;
        };
        let lp = emission_table(&params.emission, &user, session);
        let (alpha, scale, l) = forward(&params, &lp, &session.pages);
        if l == f64::NEG_INFINITY {
            grad.iter_mut().for_each(|g| *g = f64::NAN);
            return f64::INFINITY;
        }
        ll += l;
        let t_len = session.len();
        // scaled backward pass
        let mut beta = vec![1.0; t_len * k];
        for t in (0..t_len - 1).rev() {
            let o = session.pages[t + 1].index();
            let m = (0..k).map(|s| lp[(t + 1) * k + s][o]).fold(f64::NEG_INFINITY, f64::max);
            for s in 0..k {
                let mut v = 0.0;
                for j in 0..k {
                    v += params.a[s * k + j] * exp(lp[(t + 1) * k + j][o] - m) * beta[(t + 1) * k + j];
                }
                beta[t * k + s] = v / scale[t + 1];
            }
            if !layout.fixed_identity {
                for s in 0..k {
                    for j in 0..k {
                        xi[s * k + j] += alpha[t * k + s] * params.a[s * k + j] * exp(lp[(t + 1) * k + j][o] - m)
                            * beta[(t + 1) * k + j]
                            / scale[t + 1];
                    }
                }
            }
        }
        for s in 0..k {
            start[s] += alpha[s] * beta[s];
        }
        for t in 0..t_len {
            let o_t = session.pages[t].index();
            let x = params.emission.features(&session.covariates[t]);
            for s in 0..k {
                let occ = alpha[t * k + s] * beta[t * k + s];
                if occ == 0.0 {
                    continue;
                }
                for o in 0..PAGE_COUNT {
                    let resid = occ * (f64::from(u8::from(o == o_t)) - exp(lp[t * k + s][o]));
                    for (r, &rv) in session.demographics.iter().enumerate() {
                        grad[e0 + params.emission.intercept_index(s, o, r)] += resid * rv;
                        for (j, &xj) in x.iter().enumerate() {
                            grad[e0 + ni + params.emission.coefficient_index(s, o, j, r)] += resid * xj * rv;
                        }
                    }
                }
            }
        }
    }
    let n = sessions.len() as f64;
    let mut lpost = ll;
    // π with Dirichlet(1) and softmax Jacobian
    for j in 1..k {
        grad[j - 1] = start[j] - params.pi[j] * n + 1.0 - k as f64 * params.pi[j];
    }
    lpost += params.pi.iter().map(|&v| ln(v)).sum::<f64>();
    if !layout.fixed_identity {
        for s in 0..k {
            let row = &params.a[s * k..(s + 1) * k];
            let total: f64 = xi[s * k..(s + 1) * k].iter().sum();
            for j in 1..k {
                grad[k - 1 + s * (k - 1) + j - 1] = xi[s * k + j] - row[j] * total + 1.0 - k as f64 * row[j];
            }
            lpost += row.iter().map(|&v| ln(v)).sum::<f64>();
        }
    }
    let var = LOGIT_PRIOR_SD * LOGIT_PRIOR_SD;
    for (i, &v) in params.emission.intercepts.iter().chain(&params.emission.coefficients).enumerate() {
        lpost += normal_log_pdf(v, 0.0, LOGIT_PRIOR_SD);
        grad[e0 + i] -= v / var;
    }
    grad.iter_mut().for_each(|g| *g = -*g);
    if lpost.is_nan() || grad.iter().any(|g| g.is_nan()) {
        return f64::INFINITY;
    }
    -lpost
}

/// Fitted HMM with its objective.
#[derive(Debug, Clone)]
pub struct HmmFit {
    pub params: HmmParams,
    pub objective: f64,
    pub iterations: usize,
    pub reason: StopReason,
}

fn fit(sessions: &[Session], config: &FitConfig, fixed_identity: bool) -> Result<HmmFit> {
    if sessions.is_empty() {
        return Err(Error::Config("fitting needs at least one session".into()));
    }
    if config.k == 0 {
        return Err(Error::ModelStructure("K must be positive".into()));
    }
    let k = config.k;
    let layout = HmmLayout {
        k,
        fixed_identity: fixed_identity || k == 1,
        template: EmissionParams::zeros(k, config.covariates.clone(), config.demographic_dim),
    };
    let lbfgs = LbfgsConfig {
        memory: config.memory,
        max_iterations: config.max_iterations,
        relative_tolerance: config.tolerance,
        gradient_tolerance: config.gradient_tolerance,
        ..LbfgsConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, LOGIT_PRIOR_SD).unwrap();
    let mut best: Option<(Vec<f64>, crate::optim::OptimResult)> = None;
    for _ in 0..config.restarts.max(1) {
        // start: Dirichlet(1) simplices, Normal(0, 5²) loadings
        let mut z = Vec::with_capacity(layout.len());
        let dir = |rng: &mut ChaCha8Rng, z: &mut Vec<f64>| {
            let draws: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect::<Vec<f64>>();
            z.extend(draws[1..].iter().map(|&v: &f64| ln(v.max(1e-12)) - ln(draws[0].max(1e-12))));
        };
        dir(&mut rng, &mut z);
        for _ in 0..(layout.a_len() / (k - 1).max(1)) {
            dir(&mut rng, &mut z);
        }
        let n_emit = layout.template.intercepts.len() + layout.template.coefficients.len();
        z.extend((0..n_emit).map(|_| normal.sample(&mut rng)));
        let result = minimize(|z, g| hmm_objective(&layout, sessions, z, g), &z, &lbfgs);
        if result.value.is_finite() && best.as_ref().is_none_or(|(_, b)| result.value < b.value) {
            best = Some((z, result));
        }
    }
    let Some((_, result)) = best else {
        return Err(Error::EstimationFailed { message: "all HMM optimization runs diverged".into(), best_objective: f64::INFINITY });
    };
    Ok(HmmFit { params: layout.unpack(&result.x), objective: result.value, iterations: result.iterations, reason: result.reason })
}

/// MAP fit of a standard HMM with `config.k` states.
pub fn hmm_fit(sessions: &[Session], config: &FitConfig) -> Result<HmmFit> {
    fit(sessions, config, false)
}

/// MAP fit with transitions disabled (`A = I`).
pub fn static_hmm_fit(sessions: &[Session], config: &FitConfig) -> Result<HmmFit> {
    fit(sessions, config, true)
}

/// Negative log posterior and gradient at `params`, for gradient checks.
pub fn hmm_objective_at(params: &HmmParams, sessions: &[Session], fixed_identity: bool) -> Result<(Vec<f64>, f64, Vec<f64>)> {
    params.validate()?;
    let layout = HmmLayout { k: params.k(), fixed_identity, template: params.emission.clone() };
    let z = layout.pack(params);
    let mut g = vec![0.0; z.len()];
    let v = hmm_objective(&layout, sessions, &z, &mut g);
    Ok((z, v, g))
}

/// Objective value at unconstrained coordinates `z` (see [`hmm_objective_at`]).
pub fn hmm_objective_value(template: &HmmParams, sessions: &[Session], fixed_identity: bool, z: &[f64]) -> f64 {
    let layout = HmmLayout { k: template.k(), fixed_identity, template: template.emission.clone() };
    let mut g = vec![0.0; z.len()];
    hmm_objective(&layout, sessions, z, &mut g)
}
