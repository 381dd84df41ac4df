//! Exit-prediction metrics and evaluation protocol.

mod curves;
mod eval;


pub use curves::{auprc, auroc, hit_rate_at_fpr, operating_point_at_fpr, roc_points, threshold_at_fpr, OperatingPoint};
pub use eval::{
    collect_scores, evaluate_exit_prediction, metric_report, select_k, split_sessions, ConstantScorer, DdhmmScorer, ExitScorer,
    MetricReport, OracleScorer, Pooling, Selection, SelectionRow, DEFAULT_FPR, DEFAULT_TRAIN_FRACTION,
};
