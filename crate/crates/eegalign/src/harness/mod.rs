//! Evaluation protocols, scoring, and result serialization.
//!
//! A [`pipeline::PipelineSpec`] names an alignment strategy and a model
//! chain; [`offline::loso_eval`] scores it with leave-one-subject-out
//! transfer and [`online::online_eval`] replays trial-by-trial arrival with
//! a growing alignment pool. Results land in an [`report::EvalReport`] that
//! serializes to JSON and flattens to CSV, and [`metrics`] / [`ttest`]
//! provide the scoring primitives.

pub mod metrics;
pub mod offline;
pub mod online;
pub mod pipeline;
pub mod report;
pub mod ttest;

pub use metrics::{accuracy, auc_curve, balanced_accuracy, ConfusionCounts};
pub use offline::loso_eval;
pub use online::{online_eval, online_run_once, pool_from_start, OnlineConfig};
pub use pipeline::{
    align_subject, fit_pipeline, merge_aligned, select_reference_pool, AlignedSubject,
    AlignmentSpec, ClassLabels, FittedPipeline, ModelChain, PipelineSpec,
};
pub use report::{
    read_score_rows, task_metric, CurvePoint, EvalReport, RepetitionResult, ScoreRow,
    StageTimings, SubjectResult,
};
pub use ttest::{paired_t_test, TTestResult};
