//! Dynamic-targeting case study: show a marketing page when the predicted
//! exit probability crosses a threshold and measure conversion uplift.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sampler::{sample_with, CovariateProcess, Generator, GeneratorConfig};
use crate::error::{Error, Result};
use crate::inference::{state_posterior, Convention, Evaluator, Filter, Workspace};
use crate::math::sqrt;
use crate::metrics::threshold_at_fpr;
use crate::model::{CovariateVector, ModelParams, PageCategory, Session, PAGE_COUNT};

/// How the marketing page acts on the latent state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Same effectiveness whatever the state.
    Uniform,
    /// Effectiveness scaled by a per-state profile, evaluated at the
    /// posterior-modal state; halved when the page cannot be tailored.
    StateDependent,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Uniform => "uniform",
            Scenario::StateDependent => "state-dependent",
        }
    }
}

/// When and how to intervene.
#[derive(Debug, Clone, PartialEq)]
pub struct InterventionPolicy {
    /// Intervene once the predicted exit probability reaches this value.
    pub threshold: f64,
    /// Probability of moving the user to the goal state.
    pub effectiveness: f64,
    pub scenario: Scenario,
    pub goal_state: usize,
    /// Per-state multipliers of the effectiveness under
    /// [`Scenario::StateDependent`].
    pub state_profile: Vec<f64>,
    /// Whether the page can be tailored to the latent state.
    pub tailored: bool,
    /// Start a fresh run (new duration) of the goal state on a forced change;
    /// otherwise the current run's clock carries over.
    pub reset_duration: bool,
}

impl InterventionPolicy {
    pub fn new(threshold: f64, effectiveness: f64, scenario: Scenario, goal_state: usize, k: usize) -> Self {
        Self {
            threshold,
            effectiveness,
            scenario,
            goal_state,
            state_profile: vec![1.0; k],
            tailored: true,
            reset_duration: true,
        }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!("threshold must lie in [0, 1], got {}", self.threshold)));
        }
        if !(0.0..=1.0).contains(&self.effectiveness) {
            return Err(Error::Config("effectiveness must lie in [0, 1]".into()));
        }
        if self.goal_state >= k {
            return Err(Error::Config(format!("goal state {} out of range for K = {k}", self.goal_state)));
        }
        if self.state_profile.len() != k || self.state_profile.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("state profile needs K entries in [0, 1]".into()));
        }
        Ok(())
    }

    /// Probability that the intervention moves a user whose posterior-modal
    /// state is `modal`.
    pub fn success_probability(&self, modal: usize) -> f64 {
        match self.scenario {
            Scenario::Uniform => self.effectiveness,
            Scenario::StateDependent => {
                let base = self.effectiveness * self.state_profile[modal];
                if self.tailored {
                    base
                } else {
                    0.5 * base
                }
            }
        }
    }
}

/// State whose cold-start emission puts the most mass on Checkout.
pub fn goal_state_by_checkout(params: &ModelParams) -> Result<usize> {
    let user = params.emission.specialize(&[1.0])?;
    let x = vec![0.0; params.emission.covariate_dim()];
    let mut best = (0, f64::NEG_INFINITY);
    for s in 0..params.k() {
        let mut p = [0.0; PAGE_COUNT];
        user.probs(s, &x, &mut p);
        if p[PageCategory::Checkout.index()] > best.1 {
            best = (s, p[PageCategory::Checkout.index()]);
        }
    }
    Ok(best.0)
}

/// A treated session and whether (and where) the page was shown.
#[derive(Debug, Clone, PartialEq)]
pub struct TreatedSession {
    pub session: Session,
    /// 0-based position of the marketing page.
    pub intervention_step: Option<usize>,
    pub moved_to_goal: bool,
}

fn coin_rng(config: &GeneratorConfig, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x6a09_e667_f3bc_c908);
    rng.set_stream(index);
    rng
}

/// Samples session `index` under `policy`. All draws before the trigger
/// come from the same stream as the untreated session, and the draws the
/// intervention adds come from a separate stream, so both arms share their
/// trajectory up to the trigger.
pub fn sample_treated_session(
    params: &ModelParams,
    policy: &InterventionPolicy,
    config: &GeneratorConfig,
    index: u64,
) -> Result<TreatedSession> {
    policy.validate(params.k())?;
    let generator = Generator::new(params, config)?;
    let filter = Filter::new(params, &config.demographics)?;
    treated_with(&generator, &filter, policy, config, index)
}

fn session_id(index: u64) -> alloc::string::String {
    format!("sim-{index:06}")
}

fn start_ms(config: &GeneratorConfig, index: u64) -> i64 {
    config.start_time_ms + 60_000 * index as i64
}

fn treated_with(
    generator: &Generator<'_>,
    filter: &Filter<'_>,
    policy: &InterventionPolicy,
    config: &GeneratorConfig,
    index: u64,
) -> Result<TreatedSession> {
    let mut rng = config.session_rng(index);
    let mut coin = coin_rng(config, index);
    let start = start_ms(config, index);
    let mut process = CovariateProcess::new(config, start, &mut rng);
    let mut cursor = generator.start(&mut rng);
    let mut pages = Vec::new();
    let mut covariates: Vec<CovariateVector> = Vec::new();
    let mut state = filter.initial_state();
    let mut intervention_step = None;
    let mut moved = false;
    for t in 0..config.max_session_length {
        let mut cov = process.next(&mut rng);
        if intervention_step.is_none() && t > 0 {
            let exit = filter.predict_next_page(&state, &cov)?[PageCategory::Exit.index()];
            if exit >= policy.threshold {
                let posterior = state_posterior(&state)?;
                let modal = (0..posterior.len()).max_by(|&a, &b| posterior[a].total_cmp(&posterior[b])).unwrap();
                intervention_step = Some(pages.len());
                pages.push(PageCategory::MarketingPage);
                covariates.push(cov);
                process.observe(PageCategory::MarketingPage);
                if coin.random::<f64>() < policy.success_probability(modal) {
                    moved = true;
                    if policy.reset_duration {
                        cursor = generator.enter(policy.goal_state, &mut coin);
                    } else {
                        cursor.state = policy.goal_state;
                    }
                }
                cov = process.next(&mut coin);
            }
        }
        let page = generator.emit(cursor.state, &cov, &mut rng);
        pages.push(page);
        covariates.push(cov);
        process.observe(page);
        if intervention_step.is_none() {
            state = filter.step(&state, page, &cov)?;
        }
        if page.is_terminal() {
            break;
        }
        generator.advance(&mut cursor, &mut rng);
    }
    let id = session_id(index);
    Ok(TreatedSession {
        session: Session {
            session_id: id.clone(),
            user_id: id,
            pages,
            covariates,
            demographics: config.demographics.clone(),
            start_time_ms: process.start_ms,
        },
        intervention_step,
        moved_to_goal: moved,
    })
}

/// Conversion outcome of one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmResult {
    /// `None` for the control arm.
    pub scenario: Option<Scenario>,
    pub effectiveness: f64,
    pub sessions: usize,
    pub conversions: usize,
    pub interventions: usize,
    pub conversion_rate: f64,
    /// `(rate_treated - rate_control) / rate_control`.
    pub uplift: f64,
    /// Half-width of a normal 95% interval of the uplift from paired
    /// per-session differences.
    pub uplift_half_width: f64,
}

/// Control arm of `n` sessions: conversion indicators.
fn control_conversions(generator: &Generator<'_>, config: &GeneratorConfig, n: usize) -> Vec<bool> {
    (0..n as u64)
        .map(|i| {
            let mut rng = config.session_rng(i);
            sample_with(generator, config, &session_id(i), start_ms(config, i), &mut rng).session.converted()
        })
        .collect()
}

fn arm_result(
    scenario: Option<Scenario>,
    effectiveness: f64,
    control: &[bool],
    treated: &[bool],
    interventions: usize,
) -> ArmResult {
    let n = control.len() as f64;
    let base = control.iter().filter(|&&c| c).count() as f64 / n;
    let conversions = treated.iter().filter(|&&c| c).count();
    let rate = conversions as f64 / n;
    let diffs: Vec<f64> = control.iter().zip(treated).map(|(&c, &t)| f64::from(u8::from(t)) - f64::from(u8::from(c))).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = if control.len() > 1 { diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    let (uplift, half) = if base > 0.0 { (mean / base, 1.96 * sqrt(var / n) / base) } else { (f64::NAN, f64::NAN) };
    ArmResult {
        scenario,
        effectiveness,
        sessions: control.len(),
        conversions,
        interventions,
        conversion_rate: rate,
        uplift,
        uplift_half_width: half,
    }
}

/// Control and treated arms for one policy over `n_sessions` sessions.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseStudyOutcome {
    pub control: ArmResult,
    pub treatment: ArmResult,
}

pub fn run_case_study(
    params: &ModelParams,
    policy: &InterventionPolicy,
    n_sessions: usize,
    config: &GeneratorConfig,
) -> Result<CaseStudyOutcome> {
    policy.validate(params.k())?;
    if n_sessions == 0 {
        return Err(Error::Config("the case study needs at least one session".into()));
    }
    let generator = Generator::new(params, config)?;
    let filter = Filter::new(params, &config.demographics)?;
    let control = control_conversions(&generator, config, n_sessions);
    let (treated, interventions) = treated_arm(&generator, &filter, policy, config, n_sessions)?;
    Ok(CaseStudyOutcome {
        control: arm_result(None, 0.0, &control, &control, 0),
        treatment: arm_result(Some(policy.scenario), policy.effectiveness, &control, &treated, interventions),
    })
}

fn treated_arm(
    generator: &Generator<'_>,
    filter: &Filter<'_>,
    policy: &InterventionPolicy,
    config: &GeneratorConfig,
    n: usize,
) -> Result<(Vec<bool>, usize)> {
    let mut interventions = 0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n as u64 {
        let t = treated_with(generator, filter, policy, config, i)?;
        interventions += usize::from(t.intervention_step.is_some());
        out.push(t.session.converted());
    }
    Ok((out, interventions))
}

/// Threshold reaching the target step-level false-positive rate of the
/// censored exit predictions on `n` freshly simulated sessions.
pub fn calibrate_threshold(params: &ModelParams, config: &GeneratorConfig, n: usize, target_fpr: f64) -> Result<f64> {
    let sessions = super::sample_sessions(params, config, n)?;
    let max_len = sessions.iter().map(|s| s.session.len()).max().unwrap_or(1);
    let eval = Evaluator::new(params, Convention::Censored, max_len)?;
    let mut ws = Workspace::default();
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for s in &sessions {
        let trace = crate::inference::prediction_trace_with(&eval, &s.session, &mut ws)?;
        for t in 1..s.session.len() {
            scores.push(trace.steps[t].exit_prob);
            labels.push(s.session.pages[t] == PageCategory::Exit);
        }
    }
    let threshold = threshold_at_fpr(&scores, &labels, target_fpr)?;
    Ok(threshold.min(1.0))
}

/// Grid of effectiveness levels and scenarios sharing one control arm.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseStudyConfig {
    pub n_sessions: usize,
    pub generator: GeneratorConfig,
    pub goal_state: Option<usize>,
    /// Calibrated when absent.
    pub threshold: Option<f64>,
    pub target_fpr: f64,
    pub calibration_sessions: usize,
    pub effectiveness: Vec<f64>,
    pub scenarios: Vec<Scenario>,
    pub state_profile: Option<Vec<f64>>,
    pub tailored: bool,
    pub reset_duration: bool,
}

impl CaseStudyConfig {
    pub fn new(n_sessions: usize, seed: u64) -> Self {
        Self {
            n_sessions,
            generator: GeneratorConfig::with_seed(seed),
            goal_state: None,
            threshold: None,
            target_fpr: 0.30,
            calibration_sessions: 2000,
            effectiveness: vec![0.10, 0.50, 1.00],
            scenarios: vec![Scenario::Uniform, Scenario::StateDependent],
            state_profile: None,
            tailored: true,
            reset_duration: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseStudyReport {
    pub threshold: f64,
    pub goal_state: usize,
    pub control: ArmResult,
    pub treatments: Vec<ArmResult>,
}

pub fn run_case_study_grid(params: &ModelParams, config: &CaseStudyConfig) -> Result<CaseStudyReport> {
    if config.n_sessions == 0 {
        return Err(Error::Config("the case study needs at least one session".into()));
    }
    let k = params.k();
    let goal_state = match config.goal_state {
        Some(g) => g,
        None => goal_state_by_checkout(params)?,
    };
    let threshold = match config.threshold {
        Some(t) => t,
        None => {
            let calibration = GeneratorConfig { seed: config.generator.seed ^ 0xbb67_ae85_84ca_a73b, ..config.generator.clone() };
            calibrate_threshold(params, &calibration, config.calibration_sessions, config.target_fpr)?
        }
    };
    let generator = Generator::new(params, &config.generator)?;
    let filter = Filter::new(params, &config.generator.demographics)?;
    let control = control_conversions(&generator, &config.generator, config.n_sessions);
    let mut treatments = Vec::new();
    for &scenario in &config.scenarios {
        for &e in &config.effectiveness {
            let policy = InterventionPolicy {
                threshold,
                effectiveness: e,
                scenario,
                goal_state,
                state_profile: config.state_profile.clone().unwrap_or_else(|| vec![1.0; k]),
                tailored: config.tailored,
                reset_duration: config.reset_duration,
            };
            policy.validate(k)?;
            let (treated, interventions) = treated_arm(&generator, &filter, &policy, &config.generator, config.n_sessions)?;
            treatments.push(arm_result(Some(scenario), e, &control, &treated, interventions));
        }
    }
    Ok(CaseStudyReport {
        threshold,
        goal_state,
        control: arm_result(None, 0.0, &control, &control, 0),
        treatments,
    })
}
