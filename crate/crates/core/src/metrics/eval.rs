//! Time-ordered splitting, exit-prediction evaluation and K selection.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::curves::{auprc, auroc, hit_rate_at_fpr};
use crate::error::{Error, Result};
use crate::estimation::{fit_map, FitConfig};
use crate::inference::{prediction_trace_with, Convention, Evaluator, Workspace};
use crate::model::{ModelParams, PageCategory, Session};

/// Target false-positive rate of the hit rate.
pub const DEFAULT_FPR: f64 = 0.30;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.75;

/// Splits sessions by start time, ties broken by session id. The training
/// part holds the first `floor(fraction * n)` sessions, kept within
/// `1..=n-1`.
pub fn split_sessions(sessions: &[Session], train_fraction: f64) -> Result<(Vec<Session>, Vec<Session>)> {
    if sessions.len() < 4 {
        return Err(Error::Split(format!("need at least 4 sessions to split, got {}", sessions.len())));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Split("train fraction must lie in (0, 1)".into()));
    }
    let mut sorted = sessions.to_vec();
    sorted.sort_by(|a, b| a.start_time_ms.cmp(&b.start_time_ms).then_with(|| a.session_id.cmp(&b.session_id)));
    let n = sorted.len();
    let cut = ((train_fraction * n as f64) as usize).clamp(1, n - 1);
    let test = sorted.split_off(cut);
    Ok((sorted, test))
}

/// Anything that scores `P(O_t = Exit | o_1..o_{t-1})` for every step.
pub trait ExitScorer {
    fn name(&self) -> String;

    /// Number of latent states, if the model has them.
    fn states(&self) -> Option<usize> {
        None
    }

    /// One score per step `t = 1..=T`.
    fn exit_scores(&self, session: &Session) -> Result<Vec<f64>>;
}

/// DDHMM scorer through the prediction trace.
#[derive(Debug, Clone)]
pub struct DdhmmScorer {
    pub params: ModelParams,
    pub convention: Convention,
}

impl DdhmmScorer {
    /// Scores with the censored (generatively exact) filter.
    pub fn new(params: ModelParams) -> Self {
        Self { params, convention: Convention::Censored }
    }
}

impl ExitScorer for DdhmmScorer {
    fn name(&self) -> String {
        "DDHMM".into()
    }

    fn states(&self) -> Option<usize> {
        Some(self.params.k())
    }

    fn exit_scores(&self, session: &Session) -> Result<Vec<f64>> {
        let eval = Evaluator::new(&self.params, self.convention, session.len())?;
        let mut ws = Workspace::default();
        let trace = prediction_trace_with(&eval, session, &mut ws)?;
        Ok(trace.steps.iter().map(|s| s.exit_prob).collect())
    }
}

impl<T: ExitScorer + ?Sized> ExitScorer for Box<T> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn states(&self) -> Option<usize> {
        (**self).states()
    }
    fn exit_scores(&self, session: &Session) -> Result<Vec<f64>> {
        (**self).exit_scores(session)
    }
}

/// Reference scorer that peeks at the realized pages: 1 for Exit, else 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleScorer;

impl ExitScorer for OracleScorer {
    fn name(&self) -> String {
        "Oracle".into()
    }

    fn exit_scores(&self, session: &Session) -> Result<Vec<f64>> {
        Ok(session.pages.iter().map(|&p| f64::from(u8::from(p == PageCategory::Exit))).collect())
    }
}

/// Scores every step with the same value.
#[derive(Debug, Clone, Copy)]
pub struct ConstantScorer(pub f64);

impl ExitScorer for ConstantScorer {
    fn name(&self) -> String {
        "Constant".into()
    }

    fn exit_scores(&self, session: &Session) -> Result<Vec<f64>> {
        Ok(alloc::vec![self.0; session.len()])
    }
}

/// Which points enter the metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pooling {
    /// Every step `t >= 2` of every session, labelled by `o_t == Exit`.
    #[default]
    Step,
    /// One point per session: the score of its last step, labelled by
    /// whether the session ends in Exit.
    Session,
}

/// Scores and labels gathered from sessions.
pub fn collect_scores<S: ExitScorer + ?Sized>(
    scorer: &S,
    sessions: &[Session],
    pooling: Pooling,
) -> Result<(Vec<f64>, Vec<bool>)> {
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for session in sessions {
        let s = scorer
            .exit_scores(session)
            .map_err(|e| Error::Numerical(format!("scoring session `{}`: {e}", session.session_id)))?;
        if s.len() != session.len() {
            return Err(Error::DimensionMismatch { field: "exit scores", expected: session.len(), found: s.len() });
        }
        match pooling {
            Pooling::Step => {
                for t in 1..session.len() {
                    scores.push(s[t]);
                    labels.push(session.pages[t] == PageCategory::Exit);
                }
            }
            Pooling::Session => {
                if session.len() >= 2 {
                    scores.push(s[session.len() - 1]);
                    labels.push(session.ends_with_exit());
                }
            }
        }
    }
    Ok((scores, labels))
}

/// AUROC, AUPRC and hit rate of one model on one set of sessions.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub model: String,
    pub states: Option<usize>,
    pub points: usize,
    pub positives: usize,
    pub auroc: f64,
    pub auprc: f64,
    pub hit_rate: f64,
}

pub fn metric_report(model: String, states: Option<usize>, scores: &[f64], labels: &[bool], fpr: f64) -> Result<MetricReport> {
    Ok(MetricReport {
        model,
        states,
        points: scores.len(),
        positives: labels.iter().filter(|&&l| l).count(),
        auroc: auroc(scores, labels)?,
        auprc: auprc(scores, labels)?,
        hit_rate: hit_rate_at_fpr(scores, labels, fpr)?,
    })
}

/// Scores every prefix of every session and aggregates the metrics.
pub fn evaluate_exit_prediction<S: ExitScorer + ?Sized>(
    scorer: &S,
    sessions: &[Session],
    pooling: Pooling,
    fpr: f64,
) -> Result<MetricReport> {
    let (scores, labels) = collect_scores(scorer, sessions, pooling)?;
    metric_report(scorer.name(), scorer.states(), &scores, &labels, fpr)
}

/// One row of the K-selection table.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRow {
    pub k: usize,
    pub in_sample_auroc: f64,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub chosen: usize,
    pub params: ModelParams,
    pub rows: Vec<SelectionRow>,
}

/// Fits every `K` in `k_grid` on `sessions` and keeps the best in-sample
/// step-level AUROC; ties go to the smaller `K`.
pub fn select_k(sessions: &[Session], k_grid: &[usize], config: &FitConfig) -> Result<Selection> {
    if k_grid.is_empty() {
        return Err(Error::Config("empty K grid".into()));
    }
    let mut rows = Vec::new();
    let mut best: Option<(f64, usize, ModelParams)> = None;
    for &k in k_grid {
        let fit = fit_map(sessions, &FitConfig { k, ..config.clone() })?;
        let scorer = DdhmmScorer::new(fit.params.clone());
        let report = evaluate_exit_prediction(&scorer, sessions, Pooling::Step, DEFAULT_FPR)?;
        rows.push(SelectionRow { k, in_sample_auroc: report.auroc, objective: fit.diagnostics.objective });
        if best.as_ref().is_none_or(|(a, _, _)| report.auroc > *a) {
            best = Some((report.auroc, k, fit.params));
        }
    }
    let (_, chosen, params) = best.unwrap();
    Ok(Selection { chosen, params, rows })
}
