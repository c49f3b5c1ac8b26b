//! Trial data model, bit-exact archive I/O, and synthetic dataset generators.
//!
//! A [`Trial`] is one fixed-length epoch of multichannel signal. Trials group
//! into per-subject records, and records plus a label map form a [`Dataset`],
//! the unit every evaluation protocol consumes. Datasets persist in a simple
//! directory archive (JSON manifest plus per-subject binary files) that round
//! trips bit-exactly, and two generators produce deterministic synthetic
//! motor imagery and ERP datasets so the full pipeline stack is exercisable
//! without recorded EEG.

mod archive;
mod synth;

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use archive::{load_archive, save_archive};
pub use synth::{synth_erp, synth_mi, SynthConfig};

/// Task paradigm of a dataset, which decides the primary metric and how
/// reference trials are selected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskKind {
    /// Motor imagery: balanced classes, accuracy as primary metric, resting
    /// trials available for resting-state references.
    #[serde(rename = "mi")]
    MotorImagery,
    /// Event-related potentials: imbalanced target/non-target classes,
    /// balanced accuracy as primary metric, non-target trials double as the
    /// resting pool.
    #[serde(rename = "erp")]
    Erp,
}

/// Whether a trial is a task epoch or a resting-state epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialKind {
    Task,
    Resting,
}

/// One epoch: a channels-by-samples matrix with its acquisition context.
#[derive(Clone, Debug, PartialEq)]
pub struct Trial {
    /// Signal amplitudes, one row per channel.
    pub data: Array2<f64>,
    /// Sampling rate in Hz.
    pub fs: f64,
    /// Class id, `None` for unlabeled trials.
    pub label: Option<u32>,
    /// Subject the trial was recorded from.
    pub subject: u32,
    /// Task or resting epoch.
    pub kind: TrialKind,
}

impl Trial {
    /// Validates shape, finiteness, and sampling rate.
    pub fn new(
        data: Array2<f64>,
        fs: f64,
        label: Option<u32>,
        subject: u32,
        kind: TrialKind,
    ) -> Result<Self> {
        let (channels, samples) = data.dim();
        if channels == 0 || samples == 0 {
            return Err(Error::DimensionMismatch {
                context: "Trial::new",
                expected: "at least 1 channel and 1 sample".into(),
                got: format!("{channels}x{samples}"),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "data",
                reason: "trial contains non-finite samples".into(),
            });
        }
        if fs <= 0.0 || !fs.is_finite() {
            return Err(Error::InvalidParameter {
                name: "fs",
                reason: format!("sampling rate must be positive and finite, got {fs}"),
            });
        }
        Ok(Self {
            data,
            fs,
            label,
            subject,
            kind,
        })
    }

    /// Number of channels (rows).
    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    /// Number of samples (columns).
    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    /// Copy of this trial with the label removed. The evaluation protocols
    /// use this to guarantee no held-out label leaks into alignment.
    pub fn without_label(&self) -> Trial {
        Trial {
            label: None,
            ..self.clone()
        }
    }
}

/// All trials of one subject, in recording order.
///
/// Order is part of the data model: the simulated online protocol indexes
/// trials by sequence position.
#[derive(Clone, Debug, PartialEq)]
pub struct SubjectRecord {
    /// Subject id.
    pub subject: u32,
    /// Task trials in recording order.
    pub trials: Vec<Trial>,
    /// Resting-state trials in recording order; may be empty.
    pub resting: Vec<Trial>,
    /// Channel names, one per data row.
    pub channel_names: Vec<String>,
}

impl SubjectRecord {
    /// Validates that every trial agrees on channel count and sampling rate
    /// and carries this record's subject id.
    pub fn new(
        subject: u32,
        trials: Vec<Trial>,
        resting: Vec<Trial>,
        channel_names: Vec<String>,
    ) -> Result<Self> {
        let n_channels = channel_names.len();
        if n_channels == 0 {
            return Err(Error::InvalidParameter {
                name: "channel_names",
                reason: "at least one channel name is required".into(),
            });
        }
        let mut fs: Option<f64> = None;
        for trial in trials.iter().chain(resting.iter()) {
            if trial.n_channels() != n_channels {
                return Err(Error::DimensionMismatch {
                    context: "SubjectRecord::new",
                    expected: format!("{n_channels} channels"),
                    got: format!("{} channels", trial.n_channels()),
                });
            }
            if trial.subject != subject {
                return Err(Error::InvalidParameter {
                    name: "trials",
                    reason: format!(
                        "trial belongs to subject {} but record is for subject {subject}",
                        trial.subject
                    ),
                });
            }
            match fs {
                None => fs = Some(trial.fs),
                Some(f) if f == trial.fs => {}
                Some(f) => {
                    return Err(Error::InvalidParameter {
                        name: "trials",
                        reason: format!("mixed sampling rates {f} and {}", trial.fs),
                    });
                }
            }
        }
        Ok(Self {
            subject,
            trials,
            resting,
            channel_names,
        })
    }

    /// Number of channels shared by all trials.
    pub fn n_channels(&self) -> usize {
        self.channel_names.len()
    }
}

/// A complete dataset: subjects, class names, and the task paradigm.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub subjects: Vec<SubjectRecord>,
    /// Class id to human-readable name.
    pub label_map: BTreeMap<u32, String>,
    pub task_kind: TaskKind,
}

impl Dataset {
    /// Validates cross-subject consistency: every subject shares the channel
    /// count and sampling rate, subject ids are unique, and all trial labels
    /// appear in the label map.
    pub fn new(
        subjects: Vec<SubjectRecord>,
        label_map: BTreeMap<u32, String>,
        task_kind: TaskKind,
    ) -> Result<Self> {
        let first = subjects.first().ok_or(Error::EmptyInput {
            context: "Dataset::new",
        })?;
        let n_channels = first.n_channels();
        let mut seen_ids = std::collections::BTreeSet::new();
        for record in &subjects {
            if !seen_ids.insert(record.subject) {
                return Err(Error::InvalidParameter {
                    name: "subjects",
                    reason: format!("duplicate subject id {}", record.subject),
                });
            }
            if record.n_channels() != n_channels {
                return Err(Error::DimensionMismatch {
                    context: "Dataset::new",
                    expected: format!("{n_channels} channels"),
                    got: format!("{} channels for subject {}", record.n_channels(), record.subject),
                });
            }
            for trial in record.trials.iter().chain(record.resting.iter()) {
                if let Some(label) = trial.label {
                    if !label_map.contains_key(&label) {
                        return Err(Error::InvalidParameter {
                            name: "label_map",
                            reason: format!("trial label {label} missing from label map"),
                        });
                    }
                }
            }
        }
        let fs = Self::common_fs(&subjects)?;
        let _ = fs;
        Ok(Self {
            subjects,
            label_map,
            task_kind,
        })
    }

    fn common_fs(subjects: &[SubjectRecord]) -> Result<Option<f64>> {
        let mut fs: Option<f64> = None;
        for record in subjects {
            for trial in record.trials.iter().chain(record.resting.iter()) {
                match fs {
                    None => fs = Some(trial.fs),
                    Some(f) if f == trial.fs => {}
                    Some(f) => {
                        return Err(Error::InvalidParameter {
                            name: "subjects",
                            reason: format!("mixed sampling rates {f} and {}", trial.fs),
                        });
                    }
                }
            }
        }
        Ok(fs)
    }

    /// Channel count shared by all subjects.
    pub fn n_channels(&self) -> usize {
        self.subjects[0].n_channels()
    }

    /// Sampling rate shared by all trials, or an arbitrary default when the
    /// dataset holds no trials at all.
    pub fn fs(&self) -> f64 {
        self.subjects
            .iter()
            .flat_map(|s| s.trials.iter().chain(s.resting.iter()))
            .map(|t| t.fs)
            .next()
            .unwrap_or(1.0)
    }

    /// Channel names from the first subject.
    pub fn channel_names(&self) -> &[String] {
        &self.subjects[0].channel_names
    }
}
