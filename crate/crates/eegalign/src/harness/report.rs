//! Evaluation results and their JSON and CSV serialisations.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::TaskKind;
use crate::harness::pipeline::PipelineSpec;
use crate::Result;

/// Name of the headline metric for a task: accuracy for motor imagery,
/// balanced accuracy for the heavily imbalanced ERP paradigm.
pub fn task_metric(task: TaskKind) -> &'static str {
    match task {
        TaskKind::MotorImagery => "accuracy",
        TaskKind::Erp => "balanced_accuracy",
    }
}

/// Metric scores at one evaluation checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Number of pool trials seen; 0 for offline evaluation.
    pub checkpoint: usize,
    pub accuracy: f64,
    pub balanced_accuracy: f64,
}

impl CurvePoint {
    /// The task's headline metric at this checkpoint.
    pub fn metric(&self, task: TaskKind) -> f64 {
        match task {
            TaskKind::MotorImagery => self.accuracy,
            TaskKind::Erp => self.balanced_accuracy,
        }
    }
}

/// Checkpoint curve of one repetition for one held-out subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub repetition: usize,
    pub curve: Vec<CurvePoint>,
}

/// All repetitions of one held-out subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectResult {
    pub subject: u32,
    pub repetitions: Vec<RepetitionResult>,
}

/// Wall-clock milliseconds per evaluation stage.
///
/// Purely informational: timings are excluded from any determinism
/// guarantee on evaluation outputs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub align_ms: f64,
    pub fit_ms: f64,
    pub predict_ms: f64,
    pub total_ms: f64,
}

/// Full outcome of an offline or online evaluation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    /// `"offline"` or `"online"`.
    pub protocol: String,
    pub task: TaskKind,
    /// Headline metric name, see [`task_metric`].
    pub metric: String,
    /// Pipeline configuration the run was executed with.
    pub pipeline: PipelineSpec,
    /// Base seed the run was executed with.
    pub seed: u64,
    pub subjects: Vec<SubjectResult>,
    /// Mean of the headline metric over subjects and repetitions at the
    /// final checkpoint of each curve.
    pub mean_score: f64,
    pub timings: StageTimings,
}

impl EvalReport {
    /// Mean of the headline metric at final checkpoints, as stored in
    /// `mean_score`.
    pub fn compute_mean_score(subjects: &[SubjectResult], task: TaskKind) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for subject in subjects {
            for repetition in &subject.repetitions {
                if let Some(point) = repetition.curve.last() {
                    sum += point.metric(task);
                    count += 1;
                }
            }
        }
        if count == 0 {
            f64::NAN
        } else {
            sum / count as f64
        }
    }

    /// Writes the report as pretty-printed JSON.
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut body = serde_json::to_vec_pretty(self)?;
        body.push(b'\n');
        std::fs::write(path, body)?;
        Ok(())
    }

    /// Writes one CSV row per `(subject, repetition, checkpoint)`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record([
            "subject",
            "repetition",
            "checkpoint",
            "accuracy",
            "balanced_accuracy",
        ])?;
        for subject in &self.subjects {
            for repetition in &subject.repetitions {
                for point in &repetition.curve {
                    writer.write_record(&[
                        subject.subject.to_string(),
                        repetition.repetition.to_string(),
                        point.checkpoint.to_string(),
                        point.accuracy.to_string(),
                        point.balanced_accuracy.to_string(),
                    ])?;
                }
            }
        }
        writer.flush()?;
        Ok(())
    }
}

/// One row of the CSV emitted by [`EvalReport::write_csv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub subject: u32,
    pub repetition: usize,
    pub checkpoint: usize,
    pub accuracy: f64,
    pub balanced_accuracy: f64,
}

/// Reads back rows written by [`EvalReport::write_csv`].
pub fn read_score_rows(path: &Path) -> Result<Vec<ScoreRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}
