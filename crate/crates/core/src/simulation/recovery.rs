//! Parameter-recovery experiment: draw true parameters, simulate, refit,
//! and measure the error per parameter block.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal, StandardNormal};

use super::sampler::{sample_sessions, GeneratorConfig};
use crate::error::{Error, Result};
use crate::estimation::{fit_map, FitConfig};
use crate::inference::Convention;
use crate::math::sqrt;
use crate::model::{CovariateKind, EmissionParams, ModelParams, Session};

/// Settings of the recovery experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryConfig {
    /// Numbers of sessions to fit on.
    pub grid: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
    pub k: usize,
    pub covariates: Vec<CovariateKind>,
    /// Restarts and stopping rules of each fit; `k`, `covariates` and
    /// `seed` are overridden per run.
    pub fit: FitConfig,
    pub generator: GeneratorConfig,
    /// Also start each fit from the estimate at the previous grid point.
    pub warm_start: bool,
    /// Random restarts of warm-started fits; `None` keeps `fit.restarts`.
    pub warm_restarts: Option<usize>,
}

impl RecoveryConfig {
    pub fn new(grid: Vec<usize>, runs: usize, seed: u64) -> Self {
        let covariates = vec![CovariateKind::Weekend];
        let mut fit = FitConfig::new(3, covariates.clone());
        fit.convention = Convention::Censored;
        Self { grid, runs, seed, k: 3, covariates, fit, generator: GeneratorConfig::default(), warm_start: true, warm_restarts: None }
    }

    pub fn validate(&self) -> Result<()> {
        const ALLOWED: [usize; 6] = [50, 100, 200, 300, 400, 500];
        if self.grid.is_empty() || self.grid.iter().any(|n| !ALLOWED.contains(n)) {
            return Err(Error::Config(format!("grid must be a non-empty subset of {ALLOWED:?}")));
        }
        if self.runs == 0 {
            return Err(Error::Config("at least one run is required".into()));
        }
        if self.k < 2 {
            return Err(Error::ModelStructure("K must be at least 2".into()));
        }
        self.generator.validate()
    }
}

/// Mean absolute error of each parameter block.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BlockErrors {
    pub theta: f64,
    pub c: f64,
    pub pi: f64,
    pub mu: f64,
    pub delta: f64,
    pub gamma: f64,
    pub beta: f64,
}

impl BlockErrors {
    pub const NAMES: [&'static str; 7] = ["theta", "c", "pi", "mu", "delta", "gamma", "beta"];

    pub fn values(&self) -> [f64; 7] {
        [self.theta, self.c, self.pi, self.mu, self.delta, self.gamma, self.beta]
    }

    fn from_values(v: [f64; 7]) -> Self {
        Self { theta: v[0], c: v[1], pi: v[2], mu: v[3], delta: v[4], gamma: v[5], beta: v[6] }
    }

    /// Sum of the block errors, used to pick the state alignment.
    pub fn total(&self) -> f64 {
        self.values().iter().sum()
    }
}

fn mae(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

fn offdiag(m: &[f64], k: usize) -> Vec<f64> {
    (0..k * k).filter(|i| i / k != i % k).map(|i| m[i]).collect()
}

/// Block errors of `estimate` against `truth` with states matched as given.
pub fn block_errors(truth: &ModelParams, estimate: &ModelParams) -> BlockErrors {
    let k = truth.k();
    BlockErrors {
        theta: mae(&truth.theta, &estimate.theta),
        c: mae(&truth.c, &estimate.c),
        pi: mae(&truth.pi, &estimate.pi),
        mu: mae(&offdiag(&truth.mu, k), &offdiag(&estimate.mu, k)),
        delta: mae(&offdiag(&truth.delta, k), &offdiag(&estimate.delta, k)),
        gamma: mae(&truth.emission.intercepts, &estimate.emission.intercepts),
        beta: mae(&truth.emission.coefficients, &estimate.emission.coefficients),
    }
}

/// All permutations of `0..k`.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut perm: Vec<usize> = (0..k).collect();
    fn go(i: usize, perm: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == perm.len() {
            out.push(perm.clone());
            return;
        }
        for j in i..perm.len() {
            perm.swap(i, j);
            go(i + 1, perm, out);
            perm.swap(i, j);
        }
    }
    go(0, &mut perm, &mut out);
    out
}

/// Relabels `estimate` with the state permutation that minimizes the total
/// block error against `truth`.
pub fn align_states(truth: &ModelParams, estimate: &ModelParams) -> (ModelParams, BlockErrors) {
    permutations(truth.k())
        .into_iter()
        .map(|perm| {
            let p = estimate.permuted(&perm);
            let e = block_errors(truth, &p);
            (p, e)
        })
        .min_by(|a, b| a.1.total().total_cmp(&b.1.total()))
        .unwrap()
}

/// Draws generating parameters: logits from Normal(0, 5²), `c` from a
/// standard normal truncated to positive values, `θ` from Uniform(0, 1)
/// and `π` from a flat Dirichlet.
pub fn draw_true_params<R: Rng + ?Sized>(k: usize, covariates: Vec<CovariateKind>, rng: &mut R) -> ModelParams {
    let logit = Normal::new(0.0, 5.0).unwrap();
    let mut draw_c = || loop {
        let z: f64 = StandardNormal.sample(rng);
        let c = z.abs();
        if c > 1e-3 {
            break c;
        }
    };
    let c: Vec<f64> = (0..k).map(|_| draw_c()).collect();
    let theta: Vec<f64> = (0..k).map(|_| rng.random_range(1e-6..1.0 - 1e-6)).collect();
    let mut pi: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p = (*p / total).max(1e-12));
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    let matrix = |rng: &mut R| {
        let mut m = vec![0.0; k * k];
        for (i, v) in m.iter_mut().enumerate() {
            if i / k != i % k {
                *v = logit.sample(rng);
            }
        }
        m
    };
    let mu = matrix(rng);
    let delta = matrix(rng);
    let mut emission = EmissionParams::zeros(k, covariates, 1);
    emission.intercepts.iter_mut().for_each(|v| *v = logit.sample(rng));
    emission.coefficients.iter_mut().for_each(|v| *v = logit.sample(rng));
    ModelParams { pi, theta, c, mu, delta, emission }
}

/// One fitted (run, grid point) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryRun {
    pub run: usize,
    pub n_sessions: usize,
    /// `None` when the fit failed.
    pub errors: Option<BlockErrors>,
    pub failure: Option<String>,
    pub objective: f64,
    /// Iterations of the selected optimization run.
    pub iterations: usize,
}

/// Mean and standard deviation of the block errors over successful runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoverySummary {
    pub n_sessions: usize,
    pub successes: usize,
    pub mean: BlockErrors,
    pub sd: BlockErrors,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    pub truths: Vec<ModelParams>,
    pub runs: Vec<RecoveryRun>,
    pub summary: Vec<RecoverySummary>,
}

impl RecoveryReport {
    /// Errors of a cell, if it succeeded.
    pub fn errors(&self, run: usize, n_sessions: usize) -> Option<BlockErrors> {
        self.runs.iter().find(|r| r.run == run && r.n_sessions == n_sessions).and_then(|r| r.errors)
    }
}

/// Runs the experiment. Each run draws one set of true parameters and one
/// stream of sessions; the grid point `n` fits on the first `n` of them, so
/// larger grid points extend smaller ones.
pub fn recovery_experiment(config: &RecoveryConfig) -> Result<RecoveryReport> {
    recovery_experiment_with(config, |_, _, _| {})
}

/// As [`recovery_experiment`], calling `progress(run, n_sessions, cell)`
/// after each fit.
pub fn recovery_experiment_with<F>(config: &RecoveryConfig, mut progress: F) -> Result<RecoveryReport>
where
    F: FnMut(usize, usize, &RecoveryRun),
{
    config.validate()?;
    let mut ascending = config.grid.clone();
    ascending.sort_unstable();
    ascending.dedup();
    let max_n = *ascending.last().unwrap();
    let mut truths = Vec::with_capacity(config.runs);
    let mut runs = Vec::new();
    for run in 0..config.runs {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(run as u64);
        let truth = draw_true_params(config.k, config.covariates.clone(), &mut rng);
        let generator = GeneratorConfig { seed: rng.random(), ..config.generator.clone() };
        let sessions: Vec<Session> = sample_sessions(&truth, &generator, max_n)?.into_iter().map(|s| s.session).collect();
        let mut previous: Option<ModelParams> = None;
        for &n in &ascending {
            let warm = if config.warm_start { previous.take() } else { None };
            let restarts = match (&warm, config.warm_restarts) {
                (Some(_), Some(r)) => r,
                _ => config.fit.restarts,
            };
            let fit_config = FitConfig {
                k: config.k,
                covariates: config.covariates.clone(),
                seed: rng.random(),
                restarts,
                initial: warm.or(config.fit.initial.clone()),
                ..config.fit.clone()
            };
            let cell = match fit_map(&sessions[..n], &fit_config) {
                Ok(fit) => {
                    previous = Some(fit.params.clone());
                    let (_, errors) = align_states(&truth, &fit.params);
                    RecoveryRun {
                        run,
                        n_sessions: n,
                        errors: Some(errors),
                        failure: None,
                        objective: fit.diagnostics.objective,
                        iterations: fit.diagnostics.iterations,
                    }
                }
                Err(e) => RecoveryRun {
                    run,
                    n_sessions: n,
                    errors: None,
                    failure: Some(format!("{e}")),
                    objective: f64::NAN,
                    iterations: 0,
                },
            };
            progress(run, n, &cell);
            runs.push(cell);
        }
        truths.push(truth);
    }
    let summary = config
        .grid
        .iter()
        .map(|&n| {
            let cells: Vec<[f64; 7]> = runs
                .iter()
                .filter(|r| r.n_sessions == n)
                .filter_map(|r| r.errors.map(|e| e.values()))
                .collect();
            let m = cells.len().max(1) as f64;
            let mut mean = [0.0; 7];
            let mut sd = [0.0; 7];
            for c in &cells {
                for i in 0..7 {
                    mean[i] += c[i] / m;
                }
            }
            if cells.len() > 1 {
                for c in &cells {
                    for i in 0..7 {
                        sd[i] += (c[i] - mean[i]) * (c[i] - mean[i]) / (m - 1.0);
                    }
                }
            }
            RecoverySummary {
                n_sessions: n,
                successes: cells.len(),
                mean: BlockErrors::from_values(mean),
                sd: BlockErrors::from_values(sd.map(sqrt)),
            }
        })
        .collect();
    Ok(RecoveryReport { truths, runs, summary })
}
