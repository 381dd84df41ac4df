//! The `ddhmm` command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical failure.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ddhmm_core::baselines::{hmm_fit, logreg_fit, markov_fit, static_hmm_fit, HmmScorer};
use ddhmm_core::estimation::{fit_map, FitConfig};
use ddhmm_core::inference::{prediction_trace, Convention};
use ddhmm_core::metrics::{
    evaluate_exit_prediction, split_sessions, ConstantScorer, DdhmmScorer, ExitScorer, MetricReport, OracleScorer,
    Pooling, DEFAULT_FPR, DEFAULT_TRAIN_FRACTION,
};
use ddhmm_core::simulation::{
    draw_true_params, recovery_experiment_with, run_case_study_grid, sample_sessions, CaseStudyConfig,
    GeneratorConfig, RecoveryConfig, Scenario,
};
use ddhmm_core::{CovariateKind, ModelParams, Session};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::params_file::{read_params, write_params};
use crate::report;
use crate::sessions::{load_exclusion_list, load_sessions, save_sessions, LoadOptions};

#[derive(Debug, Parser)]
#[command(name = "ddhmm", version, about = "Duration-dependent hidden Markov models for clickstream exit prediction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    Complete,
    Censored,
}

impl From<ConventionArg> for Convention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Complete => Convention::Complete,
            ConventionArg::Censored => Convention::Censored,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    /// First-order Markov chain over pages.
    Markov,
    /// Logistic regression on covariates and the previous page.
    Logreg,
    /// Standard HMM with covariate emissions.
    Hmm,
    /// HMM without transitions.
    StaticHmm,
    /// Peeks at the realized page; an upper reference.
    Oracle,
    /// Constant score; a chance reference.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PoolingArg {
    Step,
    Session,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Uniform,
    StateDependent,
}

#[derive(Debug, clap::Args)]
pub struct DataArgs {
    /// Session log (session_id, step, timestamp_iso8601, page, customer_type).
    #[arg(long)]
    pub data: PathBuf,
    /// Session ids to drop, one per line.
    #[arg(long)]
    pub exclude: Option<PathBuf>,
    /// Share of sessions, earliest first, used for training.
    #[arg(long, default_value_t = DEFAULT_TRAIN_FRACTION)]
    pub train_fraction: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a DDHMM on the training split.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 3)]
        states: usize,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Emission covariates.
        #[arg(long, value_delimiter = ',', default_value = "visit_depth,time_span,cum_same_page,weekend,customer_type")]
        covariates: Vec<String>,
        #[arg(long, value_enum, default_value = "complete")]
        convention: ConventionArg,
        #[arg(long, default_value_t = 2000)]
        max_iterations: usize,
        /// Output directory for params.toml, restarts.csv, states.csv and trace.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Metric table of a fitted DDHMM and baselines on both splits.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        params: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',')]
        baselines: Vec<Baseline>,
        /// False-positive rate at which the hit rate is read.
        #[arg(long, default_value_t = DEFAULT_FPR)]
        fpr: f64,
        #[arg(long, value_enum, default_value = "step")]
        pooling: PoolingArg,
        /// States of the fitted HMM baselines; defaults to the DDHMM's.
        #[arg(long)]
        hmm_states: Option<usize>,
        #[arg(long, default_value_t = 3)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Metric table path; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-step DDHMM predictions on the test split.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Sample sessions from a DDHMM.
    Simulate {
        /// Generating parameters; drawn at random when absent.
        #[arg(long, conflicts_with = "states")]
        params: Option<PathBuf>,
        /// States of randomly drawn parameters.
        #[arg(long)]
        states: Option<usize>,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        max_length: usize,
        #[arg(long)]
        out: PathBuf,
        /// Hidden state of every step.
        #[arg(long)]
        latent_out: Option<PathBuf>,
        /// Where to save randomly drawn parameters.
        #[arg(long)]
        params_out: Option<PathBuf>,
    },
    /// Parameter-recovery experiment on simulated data.
    Recover {
        #[arg(long, value_delimiter = ',', default_value = "50,500")]
        grid: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[arg(long, default_value_t = 3)]
        states: usize,
        #[arg(long, default_value_t = 3)]
        restarts: usize,
        #[arg(long, default_value_t = 2000)]
        max_iterations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Summary table path; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// One row per (run, grid size).
        #[arg(long)]
        runs_out: Option<PathBuf>,
    },
    /// Simulated dynamic-targeting study.
    CaseStudy {
        #[arg(long)]
        params: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1.0")]
        effectiveness: Vec<f64>,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "uniform,state-dependent")]
        scenarios: Vec<ScenarioArg>,
        /// Exit-probability trigger; calibrated at --target-fpr when absent.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_FPR)]
        target_fpr: f64,
        #[arg(long, default_value_t = 2000)]
        calibration_sessions: usize,
        /// Goal state; the state most likely to emit Checkout when absent.
        #[arg(long)]
        goal_state: Option<usize>,
        /// Per-state effectiveness multipliers for the state-dependent scenario.
        #[arg(long, value_delimiter = ',')]
        state_profile: Option<Vec<f64>>,
        /// Marketing page cannot be tailored to the state.
        #[arg(long)]
        untailored: bool,
        /// Arms table path; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Renewal and transition curves over run lengths 1..=max-d.
    Curves {
        #[arg(long)]
        params: PathBuf,
        #[arg(long, default_value_t = 20)]
        max_d: usize,
        /// Output directory for renewal.csv and transitions.csv.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `args` (including the program name), runs the command and maps
/// the outcome to an exit code.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 1 for configuration problems, 3 for numerical failures, 2 otherwise.
pub fn exit_code(e: &Error) -> u8 {
    use ddhmm_core::Error as Core;
    match e {
        Error::Model(Core::Config(_) | Core::ModelStructure(_)) => 1,
        Error::Model(Core::Numerical(_) | Core::EstimationFailed { .. }) => 3,
        _ => 2,
    }
}

fn usage(message: impl Into<String>) -> Error {
    Error::Model(ddhmm_core::Error::Config(message.into()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn load_split(args: &DataArgs) -> Result<(Vec<Session>, Vec<Session>)> {
    let mut options = LoadOptions::default();
    if let Some(path) = &args.exclude {
        options.exclude = load_exclusion_list(path)?;
    }
    let loaded = load_sessions(&args.data, &options)?;
    eprintln!(
        "loaded {} sessions ({} too short, {} too long, {} excluded)",
        loaded.sessions.len(),
        loaded.too_short,
        loaded.too_long,
        loaded.excluded
    );
    Ok(split_sessions(&loaded.sessions, args.train_fraction)?)
}

fn parse_covariates(names: &[String]) -> Result<Vec<CovariateKind>> {
    names.iter().filter(|n| !n.is_empty()).map(|n| n.parse::<CovariateKind>().map_err(|e| usage(e.to_string()))).collect()
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Fit { data, states, restarts, seed, covariates, convention, max_iterations, out } => {
            let covariates = parse_covariates(&covariates)?;
            let mut config = FitConfig::new(states, covariates);
            config.restarts = restarts;
            config.seed = seed;
            config.convention = convention.into();
            config.max_iterations = max_iterations;
            config.validate()?;
            let (train, _) = load_split(&data)?;
            let fit = fit_map(&train, &config)?;
            for warning in &fit.diagnostics.warnings {
                eprintln!("warning: {warning}");
            }
            create_dir(&out)?;
            write_params(&out.join("params.toml"), &fit.params)?;
            report::write_restarts(create(&out.join("restarts.csv"))?, &fit.diagnostics)?;
            report::write_states(create(&out.join("states.csv"))?, &fit.params, &fit.diagnostics)?;
            report::write_objective_trace(create(&out.join("trace.csv"))?, &fit.diagnostics)?;
            eprintln!(
                "objective {} after {} iterations (restart {}, converged: {})",
                fit.diagnostics.objective, fit.diagnostics.iterations, fit.diagnostics.best_restart, fit.diagnostics.converged
            );
            Ok(())
        }
        Command::Evaluate { data, params, baselines, fpr, pooling, hmm_states, restarts, seed, out, trace } => {
            let params = read_params(&params)?;
            let (train, test) = load_split(&data)?;
            let pooling = match pooling {
                PoolingArg::Step => Pooling::Step,
                PoolingArg::Session => Pooling::Session,
            };
            let mut scorers: Vec<Box<dyn ExitScorer>> = vec![Box::new(DdhmmScorer::new(params.clone()))];
            let mut hmm_config = FitConfig::new(hmm_states.unwrap_or(params.k()), params.emission.covariates.clone());
            hmm_config.restarts = restarts;
            hmm_config.seed = seed;
            for baseline in baselines {
                let scorer: Box<dyn ExitScorer> = match baseline {
                    Baseline::Markov => Box::new(markov_fit(&train)),
                    Baseline::Logreg => Box::new(logreg_fit(&train, params.emission.covariates.clone())?),
                    Baseline::Hmm => {
                        let fit = hmm_fit(&train, &hmm_config)?;
                        Box::new(HmmScorer { params: fit.params, label: "HMM".into() })
                    }
                    Baseline::StaticHmm => {
                        let fit = static_hmm_fit(&train, &hmm_config)?;
                        Box::new(HmmScorer { params: fit.params, label: "Static HMM".into() })
                    }
                    Baseline::Oracle => Box::new(OracleScorer),
                    Baseline::Constant => Box::new(ConstantScorer(0.5)),
                };
                scorers.push(scorer);
            }
            let mut rows: Vec<(String, MetricReport)> = Vec::new();
            for (split, sessions) in [("in-sample", &train), ("out-of-sample", &test)] {
                for scorer in &scorers {
                    rows.push((split.to_owned(), evaluate_exit_prediction(scorer, sessions, pooling, fpr)?));
                }
            }
            report::write_metric_table(output(out.as_deref())?, &rows)?;
            if let Some(path) = trace {
                let traces = test
                    .iter()
                    .map(|s| Ok((prediction_trace(&params, s, Convention::Censored)?, s.pages.clone())))
                    .collect::<Result<Vec<_>>>()?;
                report::write_prediction_traces(create(&path)?, params.k(), &traces)?;
            }
            Ok(())
        }
        Command::Simulate { params, states, n, seed, max_length, out, latent_out, params_out } => {
            let truth: ModelParams = match (params, states) {
                (Some(path), _) => read_params(&path)?,
                (None, Some(k)) => {
                    if k < 2 {
                        return Err(Error::Model(ddhmm_core::Error::ModelStructure(format!("K must be at least 2, got {k}"))));
                    }
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    draw_true_params(k, CovariateKind::ALL.to_vec(), &mut rng)
                }
                (None, None) => return Err(usage("simulate needs --params or --states")),
            };
            let config = GeneratorConfig { max_session_length: max_length, ..GeneratorConfig::with_seed(seed) };
            let sampled = sample_sessions(&truth, &config, n)?;
            let sessions: Vec<Session> = sampled.iter().map(|s| s.session.clone()).collect();
            save_sessions(&out, &sessions)?;
            if let Some(path) = latent_out {
                report::write_latent_states(create(&path)?, &sampled)?;
            }
            if let Some(path) = params_out {
                write_params(&path, &truth)?;
            }
            Ok(())
        }
        Command::Recover { grid, runs, states, restarts, max_iterations, seed, out, runs_out } => {
            let mut config = RecoveryConfig::new(grid, runs, seed);
            config.k = states;
            config.fit.restarts = restarts;
            config.fit.max_iterations = max_iterations;
            let report = recovery_experiment_with(&config, |run, n, cell| match &cell.errors {
                Some(e) => eprintln!("run {run} n={n}: theta {:.4} c {:.4}", e.theta, e.c),
                None => eprintln!("run {run} n={n}: failed: {}", cell.failure.as_deref().unwrap_or("")),
            })?;
            report::write_recovery_summary(output(out.as_deref())?, &report)?;
            if let Some(path) = runs_out {
                report::write_recovery_runs(create(&path)?, &report)?;
            }
            Ok(())
        }
        Command::CaseStudy {
            params,
            n,
            seed,
            effectiveness,
            scenarios,
            threshold,
            target_fpr,
            calibration_sessions,
            goal_state,
            state_profile,
            untailored,
            out,
        } => {
            let params = read_params(&params)?;
            let mut config = CaseStudyConfig::new(n, seed);
            config.effectiveness = effectiveness;
            config.scenarios = scenarios
                .into_iter()
                .map(|s| match s {
                    ScenarioArg::Uniform => Scenario::Uniform,
                    ScenarioArg::StateDependent => Scenario::StateDependent,
                })
                .collect();
            config.threshold = threshold;
            config.target_fpr = target_fpr;
            config.calibration_sessions = calibration_sessions;
            config.goal_state = goal_state;
            config.state_profile = state_profile;
            config.tailored = !untailored;
            let report = run_case_study_grid(&params, &config)?;
            report::write_case_study(output(out.as_deref())?, &report)?;
            Ok(())
        }
        Command::Curves { params, max_d, out } => {
            if max_d == 0 {
                return Err(usage("--max-d must be at least 1"));
            }
            let params = read_params(&params)?;
            create_dir(&out)?;
            report::write_renewal_curves(create(&out.join("renewal.csv"))?, &params, max_d)?;
            report::write_transition_curves(create(&out.join("transitions.csv"))?, &params, max_d)?;
            Ok(())
        }
    }
}
