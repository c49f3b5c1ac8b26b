//! Leave-one-subject-out offline evaluation.
//!
//! Every subject is aligned independently, so per-subject alignment happens
//! once and is reused across folds. The held-out subject is aligned with its
//! labels stripped: offline transfer assumes no labeled data from the new
//! subject.

use std::time::Instant;

use rayon::prelude::*;

use crate::data::{Dataset, TaskKind, Trial};
use crate::harness::metrics::ConfusionCounts;
use crate::harness::pipeline::{
    align_subject, fit_pipeline, merge_aligned, AlignedSubject, ClassLabels, PipelineSpec,
};
use crate::harness::report::{
    task_metric, CurvePoint, EvalReport, RepetitionResult, StageTimings, SubjectResult,
};
use crate::preprocess::erp_template;
use crate::{Error, Result};

/// Aligns every subject of a dataset independently, with labels available.
pub(crate) fn align_all_subjects(
    dataset: &Dataset,
    spec: &PipelineSpec,
    labels: ClassLabels,
) -> Result<Vec<AlignedSubject>> {
    dataset
        .subjects
        .par_iter()
        .map(|subject| {
            align_subject(
                spec,
                dataset.task_kind,
                &subject.trials,
                &subject.trials,
                &subject.resting,
                labels,
                None,
            )
        })
        .collect()
}

/// Mean target response pooled over all subjects except `held`, used as the
/// augmentation template for an unlabeled held-out ERP subject.
pub(crate) fn pooled_target_template(
    dataset: &Dataset,
    labels: ClassLabels,
    held: usize,
) -> Result<Option<Trial>> {
    if dataset.task_kind != TaskKind::Erp {
        return Ok(None);
    }
    let pool: Vec<Trial> = dataset
        .subjects
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != held)
        .flat_map(|(_, s)| {
            s.trials
                .iter()
                .filter(|t| t.label == Some(labels.target))
                .cloned()
        })
        .collect();
    if pool.is_empty() {
        return Ok(None);
    }
    Ok(Some(erp_template(&pool)?))
}

/// Scores predictions against the original labels of the scored trials.
pub(crate) fn score_predictions(
    predictions: &[u32],
    originals: &[&Trial],
) -> Result<CurvePoint> {
    let mut counts = ConfusionCounts::new();
    for (prediction, trial) in predictions.iter().zip(originals) {
        let truth = trial.label.ok_or_else(|| Error::LabelsRequired {
            context: "scoring trials without ground-truth labels".to_string(),
        })?;
        counts.record(*prediction, truth);
    }
    Ok(CurvePoint {
        checkpoint: 0,
        accuracy: counts.accuracy()?,
        balanced_accuracy: counts.balanced_accuracy()?,
    })
}

/// Runs leave-one-subject-out evaluation of a pipeline over a dataset.
///
/// For each fold the remaining subjects form the training set, the held-out
/// subject is aligned without labels, and its trials are scored in one
/// batch. `seed` controls the internal cross-validation of max-margin
/// chains; fold `i` uses `seed + i`.
pub fn loso_eval(dataset: &Dataset, spec: &PipelineSpec, seed: u64) -> Result<EvalReport> {
    let total_clock = Instant::now();
    spec.validate(dataset.task_kind)?;
    let labels = ClassLabels::from_label_map(&dataset.label_map)?;
    if dataset.subjects.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "dataset",
            reason: format!(
                "leave-one-subject-out needs at least two subjects, got {}",
                dataset.subjects.len()
            ),
        });
    }

    let align_clock = Instant::now();
    let aligned = align_all_subjects(dataset, spec, labels)?;
    let align_ms = align_clock.elapsed().as_secs_f64() * 1e3;

    let folds: Vec<(SubjectResult, f64, f64)> = (0..dataset.subjects.len())
        .into_par_iter()
        .map(|held| {
            let subject = &dataset.subjects[held];
            let train_parts: Vec<AlignedSubject> = aligned
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != held)
                .map(|(_, a)| a.clone())
                .collect();
            let train = merge_aligned(train_parts)?;

            let fit_clock = Instant::now();
            let fitted = fit_pipeline(
                spec,
                dataset.task_kind,
                &train,
                labels,
                seed.wrapping_add(held as u64),
            )?;
            let fit_ms = fit_clock.elapsed().as_secs_f64() * 1e3;

            let predict_clock = Instant::now();
            let fallback = pooled_target_template(dataset, labels, held)?;
            let stripped: Vec<Trial> =
                subject.trials.iter().map(|t| t.without_label()).collect();
            let test_aligned = align_subject(
                spec,
                dataset.task_kind,
                &stripped,
                &stripped,
                &subject.resting,
                labels,
                fallback.as_ref(),
            )?;
            let predictions = fitted.predict(&test_aligned)?;
            let originals: Vec<&Trial> = subject.trials.iter().collect();
            let point = score_predictions(&predictions, &originals)?;
            let predict_ms = predict_clock.elapsed().as_secs_f64() * 1e3;

            Ok((
                SubjectResult {
                    subject: subject.subject,
                    repetitions: vec![RepetitionResult {
                        repetition: 0,
                        curve: vec![point],
                    }],
                },
                fit_ms,
                predict_ms,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut subjects = Vec::with_capacity(folds.len());
    let mut fit_ms = 0.0;
    let mut predict_ms = 0.0;
    for (result, fold_fit, fold_predict) in folds {
        subjects.push(result);
        fit_ms += fold_fit;
        predict_ms += fold_predict;
    }

    let mean_score = EvalReport::compute_mean_score(&subjects, dataset.task_kind);
    Ok(EvalReport {
        protocol: "offline".to_string(),
        task: dataset.task_kind,
        metric: task_metric(dataset.task_kind).to_string(),
        pipeline: *spec,
        seed,
        subjects,
        mean_score,
        timings: StageTimings {
            align_ms,
            fit_ms,
            predict_ms,
            total_ms: total_clock.elapsed().as_secs_f64() * 1e3,
        },
    })
}
