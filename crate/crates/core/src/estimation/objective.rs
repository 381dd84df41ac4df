use alloc::vec::Vec;

use super::prior::{log_prior, LOGIT_PRIOR_SD, SHAPE_PRIOR_MEAN, SHAPE_PRIOR_SD};
use super::transform::{log_jacobian, ParamLayout};
use crate::error::Result;
use crate::inference::{Convention, Evaluator, Expectations, Workspace};
use crate::math::log1p;
use crate::model::duration::{log_pmf_grad, log_survival_grad};
use crate::model::{ModelParams, Session};

/// Prior used by the optimization target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PriorMode {
    /// The weakly informative priors plus the change-of-variables term.
    #[default]
    WeaklyInformative,
    /// Flat on the unconstrained scale: the target is the likelihood alone.
    Flat,
}

/// `-Σ ln L(session) - ln prior(params)` on the constrained scale, with
/// the complete convention.
pub fn neg_log_posterior(params: &ModelParams, sessions: &[Session]) -> Result<f64> {
    neg_log_posterior_with(params, sessions, Convention::Complete)
}

pub fn neg_log_posterior_with(params: &ModelParams, sessions: &[Session], convention: Convention) -> Result<f64> {
    let max_len = sessions.iter().map(Session::len).max().unwrap_or(1);
    let eval = Evaluator::new(params, convention, max_len)?;
    let mut ws = Workspace::default();
    let mut total = -log_prior(params);
    for s in sessions {
        total -= eval.log_likelihood_with(s, &mut ws)?;
    }
    Ok(total)
}

/// Negative log posterior on the unconstrained scale, with its gradient.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    pub(crate) layout: ParamLayout,
    sessions: &'a [Session],
    convention: Convention,
    prior: PriorMode,
    max_len: usize,
}

impl<'a> Objective<'a> {
    pub fn new(layout: ParamLayout, sessions: &'a [Session], convention: Convention, prior: PriorMode) -> Self {
        let max_len = sessions.iter().map(Session::len).max().unwrap_or(1);
        Self { layout, sessions, convention, prior, max_len }
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    fn params(&self, z: &[f64]) -> Option<ModelParams> {
        let params = self.layout.unpack(z).ok()?;
        if params.validate().is_err() || params.pi.iter().any(|&p| p <= 0.0) {
            return None;
        }
        Some(params)
    }

    fn prior_terms(&self, params: &ModelParams) -> f64 {
        match self.prior {
            PriorMode::WeaklyInformative => log_prior(params) + log_jacobian(params),
            PriorMode::Flat => 0.0,
        }
    }

    /// Objective value; `+inf` where the parameters are degenerate.
    pub fn value(&self, z: &[f64]) -> f64 {
        let Some(params) = self.params(z) else {
            return f64::INFINITY;
        };
        let eval = Evaluator::new_unchecked(&params, self.convention, self.max_len);
        let mut ws = Workspace::default();
        let mut total = self.prior_terms(&params);
        for s in self.sessions {
            match eval.log_likelihood_with(s, &mut ws) {
                Ok(ll) => total += ll,
                Err(_) => return f64::INFINITY,
            }
        }
        if total.is_nan() {
            f64::INFINITY
        } else {
            -total
        }
    }

    /// Objective value, writing the gradient into `grad`.
    pub fn value_and_gradient(&self, z: &[f64], grad: &mut [f64]) -> f64 {
        let mut ws = Workspace::default();
        self.value_and_gradient_with(z, grad, &mut ws)
    }

    pub(crate) fn value_and_gradient_with(&self, z: &[f64], grad: &mut [f64], ws: &mut Workspace) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let Some(params) = self.params(z) else {
            grad.iter_mut().for_each(|g| *g = f64::NAN);
            return f64::INFINITY;
        };
        let eval = Evaluator::new_unchecked(&params, self.convention, self.max_len);
        let mut acc = Expectations::new(&params, self.max_len);
        for s in self.sessions {
            if eval.accumulate(s, ws, &mut acc).is_err() || acc.log_likelihood == f64::NEG_INFINITY {
                grad.iter_mut().for_each(|g| *g = f64::NAN);
                return f64::INFINITY;
            }
        }
        let value = acc.log_likelihood + self.prior_terms(&params);
        self.log_posterior_gradient(&params, &acc, grad);
        // minimize the negative
        grad.iter_mut().for_each(|g| *g = -*g);
        if value.is_nan() {
            f64::INFINITY
        } else {
            -value
        }
    }

    /// Gradient of the log posterior (not negated) from expected counts.
    fn log_posterior_gradient(&self, params: &ModelParams, acc: &Expectations, grad: &mut [f64]) {
        let k = params.k();
        let o = self.layout.offsets();
        let w = acc.max_len + 1;
        let n_sessions = self.sessions.len() as f64;
        let informative = self.prior == PriorMode::WeaklyInformative;

        for s in 0..k {
            let a = log1p(-params.theta[s]);
            let c = params.c[s];
            let (mut da, mut dc) = (0.0, 0.0);
            for d in 1..=acc.max_len {
                let n = acc.dur_pmf[s * w + d];
                if n != 0.0 {
                    let g = log_pmf_grad(a, c, d);
                    da += n * g.da;
                    dc += n * g.dc;
                }
                let n = acc.dur_surv[s * w + d];
                if n != 0.0 {
                    let g = log_survival_grad(a, c, d);
                    da += n * g.da;
                    dc += n * g.dc;
                }
            }
            let theta = params.theta[s];
            // da/dlogit(θ) = -θ, dc/dln(c) = c
            grad[o.theta + s] = -theta * da;
            grad[o.c + s] = c * dc;
            if informative {
                grad[o.theta + s] += 1.0 - 2.0 * theta;
                grad[o.c + s] += -(c - SHAPE_PRIOR_MEAN) / (SHAPE_PRIOR_SD * SHAPE_PRIOR_SD) * c + 1.0;
            }
        }

        // π: softmax with the first coordinate pinned
        for j in 1..k {
            let mut g = acc.start[j] - params.pi[j] * n_sessions;
            if informative {
                g += 1.0 - k as f64 * params.pi[j];
            }
            grad[o.pi + j - 1] = g;
        }

        // transitions: Σ_d (counts - q * row total), slope weighted by d
        let mut q = alloc::vec![0.0; k];
        let mut i = 0;
        let var = LOGIT_PRIOR_SD * LOGIT_PRIOR_SD;
        let mut row_mu: Vec<f64> = alloc::vec![0.0; k];
        let mut row_delta: Vec<f64> = alloc::vec![0.0; k];
        for s in 0..k {
            row_mu.iter_mut().for_each(|v| *v = 0.0);
            row_delta.iter_mut().for_each(|v| *v = 0.0);
            for d in 1..=acc.max_len {
                let counts = &acc.trans[(s * w + d) * k..(s * w + d + 1) * k];
                let total: f64 = counts.iter().sum();
                if total == 0.0 {
                    continue;
                }
                params.log_transition_row(s, d, &mut q);
                for j in 0..k {
                    if j != s {
                        let r = counts[j] - crate::math::exp(q[j]) * total;
                        row_mu[j] += r;
                        row_delta[j] += r * d as f64;
                    }
                }
            }
            for j in 0..k {
                if j != s {
                    let (m, dl) = (params.mu[s * k + j], params.delta[s * k + j]);
                    grad[o.mu + i] = row_mu[j] - if informative { m / var } else { 0.0 };
                    grad[o.delta + i] = row_delta[j] - if informative { dl / var } else { 0.0 };
                    i += 1;
                }
            }
        }

        for (idx, &g) in acc.grad_intercepts.iter().enumerate() {
            let prior = if informative { params.emission.intercepts[idx] / var } else { 0.0 };
            grad[o.intercepts + idx] = g - prior;
        }
        for (idx, &g) in acc.grad_coefficients.iter().enumerate() {
            let prior = if informative { params.emission.coefficients[idx] / var } else { 0.0 };
            grad[o.coefficients + idx] = g - prior;
        }
    }
}

/// Largest coordinate-wise discrepancy between the analytic gradient of the
/// unconstrained objective and central differences with step `step`,
/// measured as `|a - n| / max(1, |a|, |n|)`.
pub fn check_gradient(params: &ModelParams, sessions: &[Session], step: f64) -> Result<f64> {
    check_gradient_with(params, sessions, step, Convention::Complete)
}

pub fn check_gradient_with(params: &ModelParams, sessions: &[Session], step: f64, convention: Convention) -> Result<f64> {
    let layout = ParamLayout::of(params);
    let z = layout.pack(params)?.0;
    let objective = Objective::new(layout, sessions, convention, PriorMode::WeaklyInformative);
    let mut grad = alloc::vec![0.0; z.len()];
    objective.value_and_gradient(&z, &mut grad);
    let mut worst: f64 = 0.0;
    let mut probe = z.clone();
    for i in 0..z.len() {
        probe[i] = z[i] + step;
        let up = objective.value(&probe);
        probe[i] = z[i] - step;
        let down = objective.value(&probe);
        probe[i] = z[i];
        let numeric = (up - down) / (2.0 * step);
        let err = (grad[i] - numeric).abs() / 1f64.max(grad[i].abs()).max(numeric.abs());
        worst = worst.max(if err.is_nan() { f64::INFINITY } else { err });
    }
    Ok(worst)
}
