//! Delimited report writers. Every table has a header row and a fixed
//! column set; floats use shortest round-trip formatting.

use std::io::Write;

use ddhmm_core::estimation::FitDiagnostics;
use ddhmm_core::inference::PredictionTrace;
use ddhmm_core::metrics::MetricReport;
use ddhmm_core::model::{
    expected_duration, log_renewal_probability_consistent, log_renewal_probability_published, transition_probs,
};
use ddhmm_core::simulation::{ArmResult, CaseStudyReport, RecoveryReport, SampledSession};
use ddhmm_core::{ModelParams, PageCategory};

use crate::error::Result;

fn num(x: f64) -> String {
    x.to_string()
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| crate::Error::io("<report>", e))
}

pub const METRIC_COLUMNS: [&str; 8] = ["split", "model", "states", "points", "positives", "auroc", "auprc", "hit_rate"];

/// Metric table: one row per (split, model).
pub fn write_metric_table<W: Write>(writer: W, rows: &[(String, MetricReport)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(METRIC_COLUMNS)?;
    for (split, r) in rows {
        w.write_record([
            split.clone(),
            r.model.clone(),
            r.states.map_or_else(String::new, |k| k.to_string()),
            r.points.to_string(),
            r.positives.to_string(),
            num(r.auroc),
            num(r.auprc),
            num(r.hit_rate),
        ])?;
    }
    finish(w)
}

pub fn write_restarts<W: Write>(writer: W, diagnostics: &FitDiagnostics) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "restart",
        "random",
        "initial_objective",
        "final_objective",
        "iterations",
        "gradient_norm",
        "stop_reason",
        "selected",
    ])?;
    for r in &diagnostics.restarts {
        w.write_record([
            r.index.to_string(),
            r.random.to_string(),
            num(r.initial_objective),
            num(r.final_objective),
            r.iterations.to_string(),
            num(r.gradient_norm),
            format!("{:?}", r.reason),
            (r.index == diagnostics.best_restart).to_string(),
        ])?;
    }
    finish(w)
}

/// Per-state summary of a fit: initial probability, duration law, mean
/// duration and expected occupancy.
pub fn write_states<W: Write>(writer: W, params: &ModelParams, diagnostics: &FitDiagnostics) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["state", "pi", "theta", "c", "expected_duration", "expected_occupancy"])?;
    for s in 0..params.k() {
        let mean = expected_duration(params.theta[s], params.c[s], 1e-12).map_or(f64::NAN, |m| m);
        let occupancy = diagnostics.expected_occupancy.get(s).copied().unwrap_or(f64::NAN);
        w.write_record([s.to_string(), num(params.pi[s]), num(params.theta[s]), num(params.c[s]), num(mean), num(occupancy)])?;
    }
    finish(w)
}

pub fn write_objective_trace<W: Write>(writer: W, diagnostics: &FitDiagnostics) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["iteration", "objective"])?;
    for (i, v) in diagnostics.trace.iter().enumerate() {
        w.write_record([i.to_string(), num(*v)])?;
    }
    finish(w)
}

/// Recovery summary: one row per grid size with mean and standard
/// deviation of each block error.
pub fn write_recovery_summary<W: Write>(writer: W, report: &RecoveryReport) -> Result<()> {
    const BLOCKS: [&str; 7] = ["theta", "c", "pi", "mu", "delta", "gamma", "beta"];
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["n_sessions".to_owned(), "successes".to_owned()];
    header.extend(BLOCKS.iter().map(|b| format!("mae_{b}")));
    header.extend(BLOCKS.iter().map(|b| format!("sd_{b}")));
    w.write_record(&header)?;
    for s in &report.summary {
        let mut row = vec![s.n_sessions.to_string(), s.successes.to_string()];
        row.extend(s.mean.values().iter().map(|&v| num(v)));
        row.extend(s.sd.values().iter().map(|&v| num(v)));
        w.write_record(&row)?;
    }
    finish(w)
}

pub fn write_recovery_runs<W: Write>(writer: W, report: &RecoveryReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "run", "n_sessions", "objective", "iterations", "theta", "c", "pi", "mu", "delta", "gamma", "beta", "failure",
    ])?;
    for r in &report.runs {
        let mut row = vec![r.run.to_string(), r.n_sessions.to_string(), num(r.objective), r.iterations.to_string()];
        match r.errors {
            Some(e) => row.extend(e.values().iter().map(|&v| num(v))),
            None => row.extend(std::iter::repeat_n(String::new(), 7)),
        }
        row.push(r.failure.clone().unwrap_or_default());
        w.write_record(&row)?;
    }
    finish(w)
}

fn arm_row(arm: &ArmResult, name: &str, report: &CaseStudyReport) -> Vec<String> {
    vec![
        name.to_owned(),
        arm.scenario.map_or("none", |s| s.name()).to_owned(),
        num(arm.effectiveness),
        arm.sessions.to_string(),
        arm.conversions.to_string(),
        arm.interventions.to_string(),
        num(arm.conversion_rate),
        num(arm.uplift),
        num(arm.uplift_half_width),
        num(report.threshold),
        report.goal_state.to_string(),
    ]
}

/// Case-study arms: the control row first, then one row per treatment.
pub fn write_case_study<W: Write>(writer: W, report: &CaseStudyReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "arm",
        "scenario",
        "effectiveness",
        "sessions",
        "conversions",
        "interventions",
        "conversion_rate",
        "uplift",
        "uplift_half_width",
        "threshold",
        "goal_state",
    ])?;
    w.write_record(arm_row(&report.control, "control", report))?;
    for arm in &report.treatments {
        w.write_record(arm_row(arm, "treatment", report))?;
    }
    finish(w)
}

/// Renewal curves: `K * max_d` rows with both closed forms, linear and log.
pub fn write_renewal_curves<W: Write>(writer: W, params: &ModelParams, max_d: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "state",
        "d",
        "theta",
        "c",
        "renewal_published",
        "renewal_consistent",
        "log_renewal_published",
        "log_renewal_consistent",
    ])?;
    for s in 0..params.k() {
        let (theta, c) = (params.theta[s], params.c[s]);
        for d in 1..=max_d {
            let published = log_renewal_probability_published(theta, c, d)?;
            let consistent = log_renewal_probability_consistent(theta, c, d)?;
            w.write_record([
                s.to_string(),
                d.to_string(),
                num(theta),
                num(c),
                num(published.exp()),
                num(consistent.exp()),
                num(published),
                num(consistent),
            ])?;
        }
    }
    finish(w)
}

/// Duration-dependent transition rows: `K * max_d` rows, one column per
/// destination state.
pub fn write_transition_curves<W: Write>(writer: W, params: &ModelParams, max_d: usize) -> Result<()> {
    let k = params.k();
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["state".to_owned(), "d".to_owned()];
    header.extend((0..k).map(|s| format!("to_{s}")));
    w.write_record(&header)?;
    for s in 0..k {
        for d in 1..=max_d {
            let mut row = vec![s.to_string(), d.to_string()];
            row.extend(transition_probs(params, s, d)?.into_iter().map(num));
            w.write_record(&row)?;
        }
    }
    finish(w)
}

/// One row per session step: the observed page, the one-step-ahead exit
/// probability, the predictive simplex and the filtered state posterior.
pub fn write_prediction_traces<W: Write>(writer: W, k: usize, traces: &[(PredictionTrace, Vec<PageCategory>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = ["session_id", "step", "page", "exit_prob", "log_prefix_likelihood"].map(String::from).to_vec();
    header.extend(PageCategory::ALL.iter().map(|p| format!("p_{}", p.name())));
    header.extend((0..k).map(|s| format!("posterior_{s}")));
    w.write_record(&header)?;
    for (trace, pages) in traces {
        for step in &trace.steps {
            let mut row = vec![
                trace.session_id.clone(),
                step.step.to_string(),
                pages[step.step - 1].name().to_owned(),
                num(step.exit_prob),
                num(step.log_prefix_likelihood),
            ];
            row.extend(step.predictive.iter().map(|&p| num(p)));
            row.extend(step.state_posterior.iter().map(|&p| num(p)));
            w.write_record(&row)?;
        }
    }
    finish(w)
}

/// Hidden states of simulated sessions, one row per step.
pub fn write_latent_states<W: Write>(writer: W, sampled: &[SampledSession]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["session_id", "step", "state"])?;
    for s in sampled {
        for (t, state) in s.states.iter().enumerate() {
            w.write_record([s.session.session_id.clone(), (t + 1).to_string(), state.to_string()])?;
        }
    }
    finish(w)
}
