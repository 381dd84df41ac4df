//! Generative sampling, the parameter-recovery experiment and the
//! dynamic-targeting case study.

mod case_study;
mod recovery;
mod sampler;


pub use case_study::{
    calibrate_threshold, goal_state_by_checkout, run_case_study, run_case_study_grid, sample_treated_session,
    ArmResult, CaseStudyConfig, CaseStudyOutcome, CaseStudyReport, InterventionPolicy, Scenario, TreatedSession,
};
pub use recovery::{
    align_states, block_errors, permutations, draw_true_params, recovery_experiment, recovery_experiment_with, BlockErrors,
    RecoveryConfig, RecoveryReport, RecoveryRun, RecoverySummary,
};
pub use sampler::{
    joint_log_probability, sample_session, sample_sessions, GeneratorConfig, LatentRun, SampledSession,
};
