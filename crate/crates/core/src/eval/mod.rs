//! Repeated stratified cross-validation, confusion metrics, ROC analysis
//! and report files.

mod experiment;
mod folds;
mod metrics;
pub mod report;

pub use experiment::{
    fold_seed, global_gene_selection, run_comparison, run_experiment, run_fold, run_with_plan, AccessEvent, AccessLog, Block,
    CvReport, EvalConfig, ExperimentData, FoldResult, HygieneReport, Phase, Stat, Summary,
};
pub use folds::{check_plan, make_folds, Fold, FoldPlan};
pub use metrics::{
    auc, average_roc, confusion_metrics, curve_area, mann_whitney_auc, roc_curve, tpr_at, ConfusionMetrics, RocPoint, ROC_GRID,
};
