//! Generative sampling of sessions with their latent paths.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use crate::error::{Error, Result};
use crate::math::{exp, ln};
use crate::model::duration::{log_pmf_raw, log_survival_raw};
use crate::model::{
    align_to_weekend,
    sample_duration, CovariateTracker, CovariateVector, ModelParams, PageCategory, Session, UserEmission,
    MAX_SESSION_LEN, PAGE_COUNT,
};

/// Settings of the covariate process and session limits.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub max_session_length: usize,
    /// Location and scale of the log-normal time span, in log-seconds.
    pub time_span_log_mean: f64,
    pub time_span_log_sd: f64,
    pub weekend_probability: f64,
    pub customer_type_probability: f64,
    /// Start time of the first session; later sessions start a minute apart.
    pub start_time_ms: i64,
    pub demographics: Vec<f64>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            max_session_length: MAX_SESSION_LEN,
            time_span_log_mean: 1.0,
            time_span_log_sd: 1.0,
            weekend_probability: 2.0 / 7.0,
            customer_type_probability: 0.5,
            start_time_ms: 1_577_836_800_000,
            demographics: vec![1.0],
        }
    }
}

impl GeneratorConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_session_length < 3 {
            return Err(Error::Config("max_session_length must be at least 3".into()));
        }
        for (name, p) in [("weekend", self.weekend_probability), ("customer type", self.customer_type_probability)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} probability must lie in [0, 1]")));
            }
        }
        if !(self.time_span_log_sd >= 0.0) || !self.time_span_log_mean.is_finite() {
            return Err(Error::Config("invalid time span distribution".into()));
        }
        if self.demographics.first() != Some(&1.0) {
            return Err(Error::Config("demographics must start with the intercept 1".into()));
        }
        Ok(())
    }

    /// RNG of session `index`: a ChaCha stream keyed by the seed.
    pub fn session_rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }
}

/// One latent run of a sampled session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatentRun {
    pub state: usize,
    /// 0-based first step.
    pub start: usize,
    /// Number of observed steps in the run.
    pub length: usize,
    /// Whether the run ended (and a transition was drawn) inside the session.
    pub completed: bool,
}

/// A sampled session with its hidden path.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSession {
    pub session: Session,
    /// Latent state of every step.
    pub states: Vec<usize>,
    pub runs: Vec<LatentRun>,
}

pub(crate) fn categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding: last index with positive mass
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Per-session covariate and clock state of the generator.
pub(crate) struct CovariateProcess {
    tracker: CovariateTracker,
    span: LogNormal<f64>,
    /// Session start, moved forward by whole days to agree with the
    /// weekend draw.
    pub start_ms: i64,
    pub clock_ms: i64,
    pub steps: usize,
}

impl CovariateProcess {
    pub fn new<R: Rng + ?Sized>(config: &GeneratorConfig, start_ms: i64, rng: &mut R) -> Self {
        let weekend = rng.random_bool(config.weekend_probability);
        let customer = rng.random_bool(config.customer_type_probability);
        let start_ms = align_to_weekend(start_ms, weekend);
        Self {
            tracker: CovariateTracker::new(weekend, customer),
            span: LogNormal::new(config.time_span_log_mean, config.time_span_log_sd).unwrap(),
            start_ms,
            clock_ms: start_ms,
            steps: 0,
        }
    }

    /// Covariates of the next step, advancing the clock.
    pub fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> CovariateVector {
        let span_ms = if self.steps == 0 {
            0
        } else {
            let secs: f64 = self.span.sample(rng);
            libm::round(secs * 1000.0).min(1e12) as i64
        };
        self.clock_ms += span_ms;
        self.steps += 1;
        self.tracker.next(span_ms as f64 / 1000.0)
    }

    pub fn observe(&mut self, page: PageCategory) {
        self.tracker.observe(page);
    }
}

/// Current latent state, its drawn duration and elapsed steps.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LatentCursor {
    pub state: usize,
    pub duration: usize,
    pub elapsed: usize,
}

/// Shared pieces of the generative model.
pub(crate) struct Generator<'p> {
    pub params: &'p ModelParams,
    pub user: UserEmission,
    pub cap: usize,
}

impl<'p> Generator<'p> {
    pub fn new(params: &'p ModelParams, config: &GeneratorConfig) -> Result<Self> {
        params.validate()?;
        config.validate()?;
        let user = params.emission.specialize(&config.demographics)?;
        Ok(Self { params, user, cap: config.max_session_length + 1 })
    }

    pub fn enter<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> LatentCursor {
        let duration = sample_duration(self.params.theta[state], self.params.c[state], self.cap, rng);
        LatentCursor { state, duration, elapsed: 0 }
    }

    pub fn start<R: Rng + ?Sized>(&self, rng: &mut R) -> LatentCursor {
        let s = categorical(&self.params.pi, rng);
        self.enter(s, rng)
    }

    pub fn emit<R: Rng + ?Sized>(&self, state: usize, covariates: &CovariateVector, rng: &mut R) -> PageCategory {
        let x = self.params.emission.features(covariates);
        let mut probs = [0.0; PAGE_COUNT];
        self.user.probs(state, &x, &mut probs);
        PageCategory::from_index(categorical(&probs, rng)).unwrap()
    }

    /// Moves on after a step; draws a new state when the run is over.
    /// Returns true if a transition happened.
    pub fn advance<R: Rng + ?Sized>(&self, cursor: &mut LatentCursor, rng: &mut R) -> bool {
        cursor.elapsed += 1;
        if cursor.elapsed < cursor.duration {
            return false;
        }
        let k = self.params.k();
        let mut row = vec![0.0; k];
        self.params.log_transition_row(cursor.state, cursor.duration, &mut row);
        row.iter_mut().for_each(|v| *v = exp(*v));
        let next = categorical(&row, rng);
        *cursor = self.enter(next, rng);
        true
    }
}

pub(crate) fn record_step(states: &mut Vec<usize>, runs: &mut Vec<LatentRun>, state: usize, t: usize, new_run: bool) {
    states.push(state);
    if new_run || runs.is_empty() {
        if let Some(last) = runs.last_mut() {
            last.completed = true;
        }
        runs.push(LatentRun { state, start: t, length: 1, completed: false });
    } else {
        runs.last_mut().unwrap().length += 1;
    }
}

/// Samples one session: runs of discrete-Weibull length, emissions from the
/// covariate logit, transitions at the completed duration, until Exit or
/// the length limit.
pub fn sample_session<R: Rng + ?Sized>(
    params: &ModelParams,
    config: &GeneratorConfig,
    session_id: &str,
    start_time_ms: i64,
    rng: &mut R,
) -> Result<SampledSession> {
    let generator = Generator::new(params, config)?;
    Ok(sample_with(&generator, config, session_id, start_time_ms, rng))
}

pub(crate) fn sample_with<R: Rng + ?Sized>(
    generator: &Generator<'_>,
    config: &GeneratorConfig,
    session_id: &str,
    start_time_ms: i64,
    rng: &mut R,
) -> SampledSession {
    let mut process = CovariateProcess::new(config, start_time_ms, rng);
    let mut cursor = generator.start(rng);
    let mut pages = Vec::new();
    let mut covariates = Vec::new();
    let mut states = Vec::new();
    let mut runs = Vec::new();
    let mut new_run = true;
    for t in 0..config.max_session_length {
        let cov = process.next(rng);
        let page = generator.emit(cursor.state, &cov, rng);
        record_step(&mut states, &mut runs, cursor.state, t, new_run);
        pages.push(page);
        covariates.push(cov);
        process.observe(page);
        if page.is_terminal() {
            break;
        }
        new_run = generator.advance(&mut cursor, rng);
    }
    let session = Session {
        session_id: session_id.into(),
        user_id: session_id.into(),
        pages,
        covariates,
        demographics: config.demographics.clone(),
        start_time_ms: process.start_ms,
    };
    SampledSession { session, states, runs }
}

/// `n` sessions with independent per-session streams.
pub fn sample_sessions(params: &ModelParams, config: &GeneratorConfig, n: usize) -> Result<Vec<SampledSession>> {
    let generator = Generator::new(params, config)?;
    Ok((0..n)
        .map(|i| {
            let mut rng = config.session_rng(i as u64);
            let id = format!("sim-{i:06}");
            sample_with(&generator, config, &id, config.start_time_ms + 60_000 * i as i64, &mut rng)
        })
        .collect())
}

/// Joint log-probability of the pages and a latent path, with the last run
/// right-censored unless marked completed.
pub fn joint_log_probability(params: &ModelParams, session: &Session, runs: &[LatentRun]) -> Result<f64> {
    params.validate()?;
    session.validate()?;
    let covered: usize = runs.iter().map(|r| r.length).sum();
    if covered != session.len() || runs.is_empty() {
        return Err(Error::InvalidSession("runs must cover the session".into()));
    }
    let user = params.emission.specialize(&session.demographics)?;
    let k = params.k();
    let mut row = vec![0.0; k];
    let mut buf = [0.0; PAGE_COUNT];
    let mut total = ln(params.pi[runs[0].state]);
    for (i, run) in runs.iter().enumerate() {
        let a = crate::math::log1p(-params.theta[run.state]);
        let c = params.c[run.state];
        let last = i + 1 == runs.len();
        if last && !run.completed {
            total += log_survival_raw(a, c, run.length);
        } else {
            total += log_pmf_raw(a, c, run.length);
        }
        if !last {
            let next = runs[i + 1].state;
            if next == run.state {
                return Ok(f64::NEG_INFINITY);
            }
            params.log_transition_row(run.state, run.length, &mut row);
            total += row[next];
        }
        for t in run.start..run.start + run.length {
            let x = params.emission.features(&session.covariates[t]);
            user.log_probs(run.state, &x, &mut buf);
            total += buf[session.pages[t].index()];
        }
    }
    Ok(total)
}
