use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal};

use super::objective::{Objective, PriorMode};
use super::prior::{LOGIT_PRIOR_SD, SHAPE_PRIOR_MEAN, SHAPE_PRIOR_SD};
use super::transform::ParamLayout;
use crate::error::{Error, Result};
use crate::inference::{Convention, Evaluator, Expectations, Workspace};
use crate::model::{CovariateKind, EmissionParams, ModelParams, Session};
use crate::optim::{minimize, LbfgsConfig, StopReason};

/// Settings for MAP fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Number of latent states.
    pub k: usize,
    /// Emission covariates, in order.
    pub covariates: Vec<CovariateKind>,
    /// Length of the demographic vectors of the sessions.
    pub demographic_dim: usize,
    pub max_iterations: usize,
    /// Relative change of the objective that ends a run.
    pub tolerance: f64,
    pub gradient_tolerance: f64,
    /// Starting points drawn from the priors.
    pub restarts: usize,
    pub seed: u64,
    /// L-BFGS memory.
    pub memory: usize,
    pub convention: Convention,
    /// Extra starting point tried before the random ones.
    pub initial: Option<ModelParams>,
}

impl FitConfig {
    pub fn new(k: usize, covariates: Vec<CovariateKind>) -> Self {
        Self {
            k,
            covariates,
            demographic_dim: 1,
            max_iterations: 2000,
            tolerance: 1e-8,
            gradient_tolerance: 1e-6,
            restarts: 10,
            seed: 0,
            memory: 10,
            convention: Convention::Complete,
            initial: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::ModelStructure(alloc::format!("K must be at least 2, got {}", self.k)));
        }
        if self.max_iterations == 0 || self.memory == 0 {
            return Err(Error::Config("iteration cap and memory must be positive".into()));
        }
        if self.restarts == 0 && self.initial.is_none() {
            return Err(Error::Config("at least one restart or an initial point is required".into()));
        }
        if !(self.tolerance > 0.0) || !(self.gradient_tolerance > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        Ok(())
    }

    pub fn layout(&self) -> Result<ParamLayout> {
        ParamLayout::new(self.k, self.covariates.clone(), self.demographic_dim)
    }
}

/// Outcome of one optimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartSummary {
    pub index: usize,
    /// False for the configured initial point, true for prior draws.
    pub random: bool,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub reason: StopReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitDiagnostics {
    /// Objective of the returned parameters on the unconstrained scale.
    pub objective: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    pub best_restart: usize,
    pub restarts: Vec<RestartSummary>,
    /// Objective after every iteration of the best run.
    pub trace: Vec<f64>,
    /// Expected number of observations assigned to each (reordered) state.
    pub expected_occupancy: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: ModelParams,
    pub diagnostics: FitDiagnostics,
}

/// Permutes states so that `c` is ascending, ties broken by ascending `θ`.
pub fn reorder_states(params: &ModelParams) -> ModelParams {
    let mut perm: Vec<usize> = (0..params.k()).collect();
    perm.sort_by(|&a, &b| {
        params.c[a]
            .total_cmp(&params.c[b])
            .then(params.theta[a].total_cmp(&params.theta[b]))
    });
    params.permuted(&perm)
}

/// Draws a starting point from the priors. `c` comes from the Normal(1, 1)
/// prior truncated to positive values and `θ` from Uniform(0.01, 0.99) to
/// keep clear of the boundary.
pub fn sample_prior<R: Rng + ?Sized>(layout: &ParamLayout, rng: &mut R) -> ModelParams {
    let k = layout.k;
    let logit = Normal::new(0.0, LOGIT_PRIOR_SD).unwrap();
    let shape = Normal::new(SHAPE_PRIOR_MEAN, SHAPE_PRIOR_SD).unwrap();
    // Dirichlet(1, ..., 1) as normalized unit exponentials
    let pi: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let mut draw_shape = || loop {
        let c: f64 = shape.sample(rng);
        if c > 1e-3 {
            break c;
        }
    };
    let c: Vec<f64> = (0..k).map(|_| draw_shape()).collect();
    let theta = (0..k).map(|_| rng.random_range(0.01..0.99)).collect();
    let offdiag = |rng: &mut R| {
        let mut m = vec![0.0; k * k];
        for s in 0..k {
            for j in 0..k {
                if s != j {
                    m[s * k + j] = logit.sample(rng);
                }
            }
        }
        m
    };
    let mu = offdiag(rng);
    let delta = offdiag(rng);
    let mut emission = EmissionParams::zeros(k, layout.covariates.clone(), layout.demographic_dim);
    emission.intercepts.iter_mut().for_each(|v| *v = logit.sample(rng));
    emission.coefficients.iter_mut().for_each(|v| *v = logit.sample(rng));
    let pi: Vec<f64> = pi.into_iter().map(|p: f64| p.max(1e-12)).collect();
    let total: f64 = pi.iter().sum();
    ModelParams { pi: pi.iter().map(|p| p / total).collect(), theta, c, mu, delta, emission }
}

/// MAP estimate with multi-start L-BFGS; the result is label-ordered.
pub fn fit_map(sessions: &[Session], config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    if sessions.is_empty() {
        return Err(Error::Config("fitting needs at least one session".into()));
    }
    let layout = config.layout()?;
    for s in sessions {
        s.validate()?;
        if s.demographics.len() != layout.demographic_dim {
            return Err(Error::DimensionMismatch {
                field: "demographics",
                expected: layout.demographic_dim,
                found: s.demographics.len(),
            });
        }
    }
    let objective = Objective::new(layout.clone(), sessions, config.convention, PriorMode::WeaklyInformative);
    let lbfgs = LbfgsConfig {
        memory: config.memory,
        max_iterations: config.max_iterations,
        relative_tolerance: config.tolerance,
        gradient_tolerance: config.gradient_tolerance,
        ..LbfgsConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut starts: Vec<(bool, ModelParams)> = Vec::new();
    if let Some(init) = &config.initial {
        starts.push((false, init.clone()));
    }
    for _ in 0..config.restarts {
        starts.push((true, sample_prior(&layout, &mut rng)));
    }

    let mut summaries = Vec::with_capacity(starts.len());
    let mut best: Option<(usize, crate::optim::OptimResult)> = None;
    let mut ws = Workspace::default();
    for (index, (random, start)) in starts.into_iter().enumerate() {
        let z0 = layout.pack(&start)?.0;
        let result = minimize(|z, g| objective.value_and_gradient_with(z, g, &mut ws), &z0, &lbfgs);
        summaries.push(RestartSummary {
            index,
            random,
            initial_objective: result.trace[0],
            final_objective: result.value,
            iterations: result.iterations,
            gradient_norm: result.gradient_norm,
            reason: result.reason,
        });
        if result.value.is_finite() && best.as_ref().is_none_or(|(_, b)| result.value < b.value) {
            best = Some((index, result));
        }
    }
    let Some((best_restart, result)) = best else {
        let best_objective = summaries.iter().map(|s| s.final_objective).fold(f64::INFINITY, f64::min);
        return Err(Error::EstimationFailed {
            message: alloc::format!("all {} optimization runs diverged", summaries.len()),
            best_objective,
        });
    };
    let params = reorder_states(&layout.unpack(&result.x)?);
    let expected_occupancy = expected_occupancy(&params, sessions, config.convention)?;
    let mut warnings = Vec::new();
    for (s, &occ) in expected_occupancy.iter().enumerate() {
        if occ < 1.0 {
            warnings.push(alloc::format!(
                "state {} receives {occ:.3} expected observations; its parameters are driven by the prior",
                s + 1
            ));
        }
    }
    if !result.converged() {
        warnings.push(alloc::format!("best run stopped without converging ({:?})", result.reason));
    }
    Ok(FitResult {
        params,
        diagnostics: FitDiagnostics {
            objective: result.value,
            iterations: result.iterations,
            gradient_norm: result.gradient_norm,
            converged: result.converged(),
            best_restart,
            restarts: summaries,
            trace: result.trace,
            expected_occupancy,
            warnings,
        },
    })
}

/// Posterior expected number of observations emitted by each state.
pub fn expected_occupancy(params: &ModelParams, sessions: &[Session], convention: Convention) -> Result<Vec<f64>> {
    let max_len = sessions.iter().map(Session::len).max().unwrap_or(1);
    let eval = Evaluator::new(params, convention, max_len)?;
    let mut acc = Expectations::new(params, max_len);
    let mut ws = Workspace::default();
    for s in sessions {
        eval.accumulate(s, &mut ws, &mut acc)?;
    }
    let w = max_len + 1;
    Ok((0..params.k())
        .map(|s| (1..=max_len).map(|d| d as f64 * (acc.dur_pmf[s * w + d] + acc.dur_surv[s * w + d])).sum())
        .collect())
}
