//! Logistic regression on the covariates and a one-hot of the current page.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{log_sigmoid, sigmoid, sqrt};
use crate::metrics::ExitScorer;
use crate::model::{CovariateKind, CovariateVector, PageCategory, Session, PAGE_COUNT};

/// Ridge penalty on every weight but the intercept.
pub const RIDGE: f64 = 1e-4;

/// Weights laid out as intercept, covariates in `covariates` order, then one
/// indicator per current page.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub covariates: Vec<CovariateKind>,
    pub weights: Vec<f64>,
}

impl LogisticModel {
    pub fn zeros(covariates: Vec<CovariateKind>) -> Self {
        let n = 1 + covariates.len() + PAGE_COUNT;
        Self { covariates, weights: vec![0.0; n] }
    }

    pub fn feature_len(&self) -> usize {
        1 + self.covariates.len() + PAGE_COUNT
    }

    /// Features of predicting step `t` from its covariates and the previous
    /// page, if any.
    pub fn features(&self, covariates: &CovariateVector, current: Option<PageCategory>, out: &mut Vec<f64>) {
        out.clear();
        out.push(1.0);
        out.extend(self.covariates.iter().map(|&k| covariates.get(k)));
        out.extend((0..PAGE_COUNT).map(|o| f64::from(u8::from(current.map(PageCategory::index) == Some(o)))));
    }

    /// `σ(w·x)`.
    pub fn score(&self, covariates: &CovariateVector, current: Option<PageCategory>) -> f64 {
        let mut x = Vec::with_capacity(self.feature_len());
        self.features(covariates, current, &mut x);
        sigmoid(dot(&self.weights, &x))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Design matrix and targets: one row per step `t >= 2`, target
/// `o_t == Exit`.
#[derive(Debug, Clone, Default)]
pub struct LogisticData {
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<bool>,
}

impl LogisticData {
    pub fn from_sessions(model: &LogisticModel, sessions: &[Session]) -> Self {
        let mut data = Self::default();
        for s in sessions {
            for t in 1..s.len() {
                let mut x = Vec::new();
                model.features(&s.covariates[t], Some(s.pages[t - 1]), &mut x);
                data.rows.push(x);
                data.targets.push(s.pages[t] == PageCategory::Exit);
            }
        }
        data
    }
}

/// Penalized negative log-likelihood and its gradient.
pub fn logreg_objective(weights: &[f64], data: &LogisticData, grad: &mut [f64]) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut value = 0.0;
    for (x, &y) in data.rows.iter().zip(&data.targets) {
        let z = dot(weights, x);
        // -ln σ(z) for positives, -ln σ(-z) for negatives
        value -= if y { log_sigmoid(z) } else { log_sigmoid(-z) };
        let r = sigmoid(z) - f64::from(u8::from(y));
        for (g, &xi) in grad.iter_mut().zip(x) {
            *g += r * xi;
        }
    }
    for i in 1..weights.len() {
        value += 0.5 * RIDGE * weights[i] * weights[i];
        grad[i] += RIDGE * weights[i];
    }
    value
}

/// Solves `H d = g` for symmetric positive definite `H` by Cholesky.
fn cholesky_solve(h: &mut [f64], g: &[f64], n: usize) -> Option<Vec<f64>> {
    for j in 0..n {
        let mut d = h[j * n + j];
        for k in 0..j {
            d -= h[j * n + k] * h[j * n + k];
        }
        if !(d > 0.0) {
            return None;
        }
        let d = sqrt(d);
        h[j * n + j] = d;
        for i in j + 1..n {
            let mut v = h[i * n + j];
            for k in 0..j {
                v -= h[i * n + k] * h[j * n + k];
            }
            h[i * n + j] = v / d;
        }
    }
    let mut y = g.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= h[i * n + k] * y[k];
        }
        y[i] /= h[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= h[k * n + i] * y[k];
        }
        y[i] /= h[i * n + i];
    }
    Some(y)
}

/// Newton's method with step halving on the penalized objective.
pub fn logreg_fit(sessions: &[Session], covariates: Vec<CovariateKind>) -> Result<LogisticModel> {
    let mut model = LogisticModel::zeros(covariates);
    let data = LogisticData::from_sessions(&model, sessions);
    if data.rows.is_empty() {
        return Err(Error::Config("logistic regression needs sessions with at least two steps".into()));
    }
    logreg_fit_data(&mut model, &data)?;
    Ok(model)
}

pub fn logreg_fit_data(model: &mut LogisticModel, data: &LogisticData) -> Result<()> {
    let n = model.feature_len();
    let mut grad = vec![0.0; n];
    let mut trial_grad = vec![0.0; n];
    let mut value = logreg_objective(&model.weights, data, &mut grad);
    for _ in 0..200 {
        let gnorm = sqrt(dot(&grad, &grad));
        if gnorm < 1e-8 * (1.0 + data.rows.len() as f64).max(1.0) {
            return Ok(());
        }
        let mut h = vec![0.0; n * n];
        for x in &data.rows {
            let p = sigmoid(dot(&model.weights, x));
            let w = p * (1.0 - p);
            for i in 0..n {
                if x[i] == 0.0 {
                    continue;
                }
                for j in 0..=i {
                    h[i * n + j] += w * x[i] * x[j];
                }
            }
        }
        for i in 0..n {
            h[i * n + i] += if i == 0 { 1e-12 } else { RIDGE };
            for j in 0..i {
                h[j * n + i] = h[i * n + j];
            }
        }
        let Some(step) = cholesky_solve(&mut h, &grad, n) else {
            return Err(Error::Numerical("singular Hessian in logistic regression".into()));
        };
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = model.weights.iter().zip(&step).map(|(w, s)| w - t * s).collect();
            let v = logreg_objective(&trial, data, &mut trial_grad);
            if v <= value {
                let rel = (value - v) / value.abs().max(1.0);
                model.weights = trial;
                value = v;
                core::mem::swap(&mut grad, &mut trial_grad);
                if rel < 1e-14 {
                    return Ok(());
                }
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return Ok(());
            }
        }
    }
    let gnorm = sqrt(dot(&grad, &grad));
    Err(Error::EstimationFailed {
        message: format!("logistic regression did not converge (gradient norm {gnorm:.3e})"),
        best_objective: value,
    })
}

impl ExitScorer for LogisticModel {
    fn name(&self) -> String {
        "Logistic regression".into()
    }

    fn exit_scores(&self, session: &Session) -> Result<Vec<f64>> {
        Ok((0..session.len())
            .map(|t| self.score(&session.covariates[t], t.checked_sub(1).map(|p| session.pages[p])))
            .collect())
    }
}
