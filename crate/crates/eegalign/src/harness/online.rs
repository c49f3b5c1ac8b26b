//! Simulated-online evaluation with a growing alignment pool.
//!
//! Each repetition draws a random contiguous window (with wraparound) of a
//! subject's task trials as the arrival pool and keeps the rest as a fixed
//! test set. At every checkpoint the subject's alignment reference is
//! rebuilt from exactly the trials seen so far, the seen trials (whose
//! labels arrive with them) join the auxiliary subjects as training data,
//! the chain is retrained, and the test set is scored. Nothing from beyond
//! the checkpoint is ever consumed, which [`online_run_once`] lets callers
//! audit with hand-built index sets.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::data::{Dataset, SubjectRecord, TaskKind, Trial};
use crate::harness::metrics::ConfusionCounts;
use crate::harness::offline::{align_all_subjects, pooled_target_template};
use crate::harness::pipeline::{
    align_subject, fit_pipeline, merge_aligned, AlignedSubject, ClassLabels, PipelineSpec,
};
use crate::harness::report::{
    task_metric, CurvePoint, EvalReport, RepetitionResult, StageTimings, SubjectResult,
};
use crate::{Error, Result};

/// Schedule of the simulated-online protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnlineConfig {
    /// Total number of trials that arrive during a repetition.
    pub pool_size: usize,
    /// Arrivals accumulated before the first evaluation.
    pub first_batch: usize,
    /// Arrivals between consecutive evaluations.
    pub batch_size: usize,
    /// Independent pool draws per subject.
    pub repetitions: usize,
}

impl OnlineConfig {
    /// Checks that the schedule is consistent: batches are non-empty, the
    /// first evaluation happens after at least one full batch, and the final
    /// checkpoint lands exactly on the pool size.
    pub fn validate(&self) -> Result<()> {
        if self.pool_size == 0 {
            return Err(Error::InvalidParameter {
                name: "pool_size",
                reason: "must be at least 1".to_string(),
            });
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter {
                name: "batch_size",
                reason: "must be at least 1".to_string(),
            });
        }
        if self.first_batch < self.batch_size {
            return Err(Error::InvalidParameter {
                name: "first_batch",
                reason: format!(
                    "must be at least the batch size {}, got {}",
                    self.batch_size, self.first_batch
                ),
            });
        }
        if self.first_batch > self.pool_size {
            return Err(Error::InvalidParameter {
                name: "first_batch",
                reason: format!(
                    "must not exceed the pool size {}, got {}",
                    self.pool_size, self.first_batch
                ),
            });
        }
        if (self.pool_size - self.first_batch) % self.batch_size != 0 {
            return Err(Error::InvalidParameter {
                name: "pool_size",
                reason: format!(
                    "pool_size - first_batch = {} is not a multiple of batch_size {}",
                    self.pool_size - self.first_batch,
                    self.batch_size
                ),
            });
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidParameter {
                name: "repetitions",
                reason: "must be at least 1".to_string(),
            });
        }
        Ok(())
    }

    /// Pool sizes at which the test set is evaluated:
    /// `first_batch, first_batch + batch_size, ..., pool_size`.
    pub fn checkpoints(&self) -> Vec<usize> {
        (self.first_batch..=self.pool_size)
            .step_by(self.batch_size)
            .collect()
    }
}

/// Splits `n_trials` recording positions into a pool window and its
/// complement. The pool holds the `pool_size` trials after the 1-based
/// start position, wrapping past the end of the recording: start 190 of 200
/// trials yields positions 191, 192, ..., 200, 1, 2, ... Returned indices
/// are 0-based.
pub fn pool_from_start(
    start: usize,
    n_trials: usize,
    pool_size: usize,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if start == 0 || start > n_trials {
        return Err(Error::InvalidParameter {
            name: "start",
            reason: format!("must be a 1-based position in 1..={n_trials}, got {start}"),
        });
    }
    if pool_size >= n_trials {
        return Err(Error::InvalidParameter {
            name: "pool_size",
            reason: format!(
                "must leave at least one test trial, got {pool_size} of {n_trials}"
            ),
        });
    }
    let pool: Vec<usize> = (1..=pool_size).map(|i| (start - 1 + i) % n_trials).collect();
    let mut in_pool = vec![false; n_trials];
    for &i in &pool {
        in_pool[i] = true;
    }
    let test: Vec<usize> = (0..n_trials).filter(|&i| !in_pool[i]).collect();
    Ok((pool, test))
}

/// Draws a uniformly random pool window using the supplied generator.
fn draw_pool(
    rng: &mut ChaCha20Rng,
    n_trials: usize,
    pool_size: usize,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let start = rng.random_range(1..=n_trials);
    pool_from_start(start, n_trials, pool_size)
}

/// Replays one pool draw: reference rebuilt, chain retrained, and test set
/// scored at every checkpoint.
///
/// `pool` lists the subject's trial indices in arrival order and `test` the
/// indices of the fixed test set. At checkpoint `k` the first `k` pool
/// trials are the only subject data in play: they define the alignment
/// reference, and, labels included, extend `auxiliary` (the already aligned
/// training subjects) for retraining. Exposed so that callers can audit
/// causality with hand-built index sets. Returns the learning curve plus
/// the time spent aligning, fitting, and predicting.
#[allow(clippy::too_many_arguments)]
pub fn online_run_once(
    spec: &PipelineSpec,
    task: TaskKind,
    auxiliary: &[AlignedSubject],
    subject: &SubjectRecord,
    labels: ClassLabels,
    fallback_template: Option<&Trial>,
    pool: &[usize],
    test: &[usize],
    checkpoints: &[usize],
    seed: u64,
) -> Result<(Vec<CurvePoint>, StageTimings)> {
    let n = subject.trials.len();
    if let Some(&bad) = pool.iter().chain(test).find(|&&i| i >= n) {
        return Err(Error::InvalidParameter {
            name: "indices",
            reason: format!("trial index {bad} out of range for {n} trials"),
        });
    }
    if test.is_empty() {
        return Err(Error::InvalidParameter {
            name: "test",
            reason: "test set is empty".to_string(),
        });
    }

    let stripped: Vec<Trial> = test
        .iter()
        .map(|&i| subject.trials[i].without_label())
        .collect();
    let truths: Vec<u32> = test
        .iter()
        .map(|&i| {
            subject.trials[i].label.ok_or_else(|| Error::LabelsRequired {
                context: "scoring online test trials".to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut timings = StageTimings::default();
    let mut curve = Vec::with_capacity(checkpoints.len());
    for (step, &k) in checkpoints.iter().enumerate() {
        if k == 0 || k > pool.len() {
            return Err(Error::InvalidParameter {
                name: "checkpoints",
                reason: format!("checkpoint {k} outside 1..={}", pool.len()),
            });
        }
        let seen: Vec<Trial> = pool[..k].iter().map(|&i| subject.trials[i].clone()).collect();

        let align_clock = Instant::now();
        let aligned_seen = align_subject(
            spec,
            task,
            &seen,
            &seen,
            &subject.resting,
            labels,
            fallback_template,
        )?;
        let aligned_test = align_subject(
            spec,
            task,
            &stripped,
            &seen,
            &subject.resting,
            labels,
            fallback_template,
        )?;
        timings.align_ms += align_clock.elapsed().as_secs_f64() * 1e3;

        let fit_clock = Instant::now();
        let mut train_parts = auxiliary.to_vec();
        train_parts.push(aligned_seen);
        let train = merge_aligned(train_parts)?;
        let fitted = fit_pipeline(
            spec,
            task,
            &train,
            labels,
            seed.wrapping_add(step as u64),
        )?;
        timings.fit_ms += fit_clock.elapsed().as_secs_f64() * 1e3;

        let predict_clock = Instant::now();
        let predictions = fitted.predict(&aligned_test)?;
        timings.predict_ms += predict_clock.elapsed().as_secs_f64() * 1e3;

        let mut counts = ConfusionCounts::new();
        for (prediction, truth) in predictions.iter().zip(&truths) {
            counts.record(*prediction, *truth);
        }
        curve.push(CurvePoint {
            checkpoint: k,
            accuracy: counts.accuracy()?,
            balanced_accuracy: counts.balanced_accuracy()?,
        });
    }
    timings.total_ms = timings.align_ms + timings.fit_ms + timings.predict_ms;
    Ok((curve, timings))
}

/// Runs the simulated-online protocol over every subject of a dataset.
///
/// Pool draws are reproducible: repetition `r` for a subject uses a
/// generator seeded with `seed + r` on a stream namespaced by the subject
/// id, so results are independent of thread scheduling.
pub fn online_eval(
    dataset: &Dataset,
    spec: &PipelineSpec,
    config: &OnlineConfig,
    seed: u64,
) -> Result<EvalReport> {
    let total_clock = Instant::now();
    spec.validate(dataset.task_kind)?;
    config.validate()?;
    let labels = ClassLabels::from_label_map(&dataset.label_map)?;
    if dataset.subjects.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "dataset",
            reason: format!(
                "online evaluation needs at least two subjects, got {}",
                dataset.subjects.len()
            ),
        });
    }
    for subject in &dataset.subjects {
        if subject.trials.len() <= config.pool_size {
            return Err(Error::InvalidParameter {
                name: "pool_size",
                reason: format!(
                    "subject {} has {} trials; the pool must leave at least one for testing",
                    subject.subject,
                    subject.trials.len()
                ),
            });
        }
    }

    let align_clock = Instant::now();
    let aligned = align_all_subjects(dataset, spec, labels)?;
    let cache_align_ms = align_clock.elapsed().as_secs_f64() * 1e3;

    let folds: Vec<(Vec<AlignedSubject>, Option<Trial>)> = (0..dataset.subjects.len())
        .map(|held| {
            let auxiliary: Vec<AlignedSubject> = aligned
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != held)
                .map(|(_, a)| a.clone())
                .collect();
            let fallback = pooled_target_template(dataset, labels, held)?;
            Ok((auxiliary, fallback))
        })
        .collect::<Result<Vec<_>>>()?;

    let checkpoints = config.checkpoints();
    let pairs: Vec<(usize, usize)> = (0..dataset.subjects.len())
        .flat_map(|s| (0..config.repetitions).map(move |r| (s, r)))
        .collect();
    let runs: Vec<(usize, RepetitionResult, StageTimings)> = pairs
        .into_par_iter()
        .map(|(held, repetition)| {
            let subject = &dataset.subjects[held];
            let mut rng = ChaCha20Rng::seed_from_u64(seed.wrapping_add(repetition as u64));
            rng.set_stream(u64::from(subject.subject));
            let (pool, test) = draw_pool(&mut rng, subject.trials.len(), config.pool_size)?;
            let (auxiliary, fallback) = &folds[held];
            let run_seed = seed
                .wrapping_add((held as u64) << 32)
                .wrapping_add((repetition as u64) << 8);
            let (curve, timings) = online_run_once(
                spec,
                dataset.task_kind,
                auxiliary,
                subject,
                labels,
                fallback.as_ref(),
                &pool,
                &test,
                &checkpoints,
                run_seed,
            )?;
            Ok((held, RepetitionResult { repetition, curve }, timings))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut subjects: Vec<SubjectResult> = dataset
        .subjects
        .iter()
        .map(|s| SubjectResult {
            subject: s.subject,
            repetitions: Vec::with_capacity(config.repetitions),
        })
        .collect();
    let mut timings = StageTimings {
        align_ms: cache_align_ms,
        ..StageTimings::default()
    };
    for (held, repetition, run_timings) in runs {
        subjects[held].repetitions.push(repetition);
        timings.align_ms += run_timings.align_ms;
        timings.fit_ms += run_timings.fit_ms;
        timings.predict_ms += run_timings.predict_ms;
    }
    for subject in &mut subjects {
        subject.repetitions.sort_by_key(|r| r.repetition);
    }
    timings.total_ms = total_clock.elapsed().as_secs_f64() * 1e3;

    let mean_score = EvalReport::compute_mean_score(&subjects, dataset.task_kind);
    Ok(EvalReport {
        protocol: "online".to_string(),
        task: dataset.task_kind,
        metric: task_metric(dataset.task_kind).to_string(),
        pipeline: *spec,
        seed,
        subjects,
        mean_score,
        timings,
    })
}
