//! Deterministic synthetic dataset generators.
//!
//! Both generators model the cross-subject covariance shift that alignment is
//! meant to remove: every subject observes the same latent sources through a
//! subject-specific mixing matrix `A_s = A0 * D_s`, where `A0` is one shared
//! orthogonal basis and `D_s` is a per-subject diagonal gain whose condition
//! number is pinned by `mixing_condition`. Gains distort each subject's
//! covariances differently, so unaligned transfer degrades, while whitening
//! by the subject mean covariance cancels `D_s` and restores a shared
//! representation. Latent class structure is axis-aligned: motor imagery
//! boosts one source's variance per class, ERP adds a fixed template to
//! target trials.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use ndarray_linalg::QR;
use rand::prelude::*;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dataset, SubjectRecord, TaskKind, Trial, TrialKind};
use crate::{Error, Result};

/// Variance multiplier applied to the class-specific latent source in motor
/// imagery trials (standard deviation 2, variance 4 against baseline 1).
const CLASS_SOURCE_STD: f64 = 2.0;

/// Parameters for [`synth_mi`] and [`synth_erp`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub n_trials_per_class: usize,
    pub n_channels: usize,
    pub n_samples: usize,
    pub fs: f64,
    /// Scale of additive white noise; zero gives noiseless trials.
    pub noise_scale: f64,
    /// Upper bound (and realized value, for 2+ channels) of the condition
    /// number of each subject's mixing matrix. 1 makes every mixing matrix
    /// orthogonal and removes the cross-subject shift.
    pub mixing_condition: f64,
    pub seed: u64,
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.n_subjects == 0
            || self.n_trials_per_class == 0
            || self.n_channels == 0
            || self.n_samples == 0
        {
            return Err(Error::InvalidParameter {
                name: "SynthConfig",
                reason: "all counts must be at least 1".into(),
            });
        }
        if self.fs <= 0.0 || !self.fs.is_finite() {
            return Err(Error::InvalidParameter {
                name: "fs",
                reason: format!("sampling rate must be positive and finite, got {}", self.fs),
            });
        }
        if self.noise_scale < 0.0 || !self.noise_scale.is_finite() {
            return Err(Error::InvalidParameter {
                name: "noise_scale",
                reason: format!("must be finite and nonnegative, got {}", self.noise_scale),
            });
        }
        if self.mixing_condition < 1.0 || !self.mixing_condition.is_finite() {
            return Err(Error::InvalidParameter {
                name: "mixing_condition",
                reason: format!("must be finite and at least 1, got {}", self.mixing_condition),
            });
        }
        Ok(())
    }
}

/// Orthogonal matrix from the QR factorization of a Gaussian draw, with the
/// sign ambiguity fixed by forcing a positive R diagonal.
fn orthogonal_base(n: usize, rng: &mut impl Rng) -> Result<Array2<f64>> {
    let a = Array2::from_shape_fn((n, n), |_| rng.sample::<f64, _>(StandardNormal));
    let (mut q, r) = a.qr()?;
    for (j, mut col) in q.columns_mut().into_iter().enumerate() {
        if r[[j, j]] < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
    Ok(q)
}

/// Per-subject singular value profile: first entry 1, last entry equal to the
/// condition bound, interior entries log-uniform in between, then shuffled.
/// The realized condition number equals `cond` exactly whenever `n >= 2`.
fn mixing_gains(n: usize, cond: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut gains: Vec<f64> = (0..n)
        .map(|i| match i {
            0 => 1.0,
            i if i == n - 1 => cond,
            _ => (rng.random_range(0.0..1.0) * cond.ln()).exp(),
        })
        .collect();
    gains.shuffle(rng);
    gains
}

/// Mixes a latent source matrix through `A0 * diag(gains)`.
fn mix(a0: &Array2<f64>, gains: &[f64], latent: &Array2<f64>) -> Array2<f64> {
    let scaled = latent * &Array1::from_iter(gains.iter().copied())
        .insert_axis(ndarray::Axis(1));
    a0.dot(&scaled)
}

/// Quantizes samples to f32 precision so datasets round trip bit-exactly
/// through the archive format.
fn quantize(mut data: Array2<f64>) -> Array2<f64> {
    data.mapv_inplace(|v| (v as f32) as f64);
    data
}

fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample::<f64, _>(StandardNormal))
}

/// Synthetic two-class motor imagery dataset.
///
/// Class `c` boosts the variance of latent source `c`; resting trials keep
/// every source at baseline variance so resting-state reference variants are
/// testable. One resting trial is generated per task trial. The output is a
/// pure function of the config, including trial order.
pub fn synth_mi(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    if config.n_channels < 2 {
        return Err(Error::InvalidParameter {
            name: "n_channels",
            reason: "motor imagery generation needs at least 2 channels".into(),
        });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let a0 = orthogonal_base(config.n_channels, &mut rng)?;
    let channel_names: Vec<String> = (0..config.n_channels).map(|i| format!("ch{i:02}")).collect();
    let mut subjects = Vec::with_capacity(config.n_subjects);
    for subject in 1..=config.n_subjects as u32 {
        let gains = mixing_gains(config.n_channels, config.mixing_condition, &mut rng);
        let mut trials = Vec::with_capacity(2 * config.n_trials_per_class);
        for class in 0..2u32 {
            for _ in 0..config.n_trials_per_class {
                let mut latent = gaussian(config.n_channels, config.n_samples, &mut rng);
                latent
                    .row_mut(class as usize)
                    .mapv_inplace(|v| v * CLASS_SOURCE_STD);
                let mut data = mix(&a0, &gains, &latent);
                if config.noise_scale > 0.0 {
                    data += &(gaussian(config.n_channels, config.n_samples, &mut rng)
                        * config.noise_scale);
                }
                trials.push(Trial::new(
                    quantize(data),
                    config.fs,
                    Some(class),
                    subject,
                    TrialKind::Task,
                )?);
            }
        }
        trials.shuffle(&mut rng);
        let mut resting = Vec::with_capacity(trials.len());
        for _ in 0..trials.len() {
            let latent = gaussian(config.n_channels, config.n_samples, &mut rng);
            let mut data = mix(&a0, &gains, &latent);
            if config.noise_scale > 0.0 {
                data += &(gaussian(config.n_channels, config.n_samples, &mut rng)
                    * config.noise_scale);
            }
            resting.push(Trial::new(
                quantize(data),
                config.fs,
                None,
                subject,
                TrialKind::Resting,
            )?);
        }
        subjects.push(SubjectRecord::new(
            subject,
            trials,
            resting,
            channel_names.clone(),
        )?);
    }
    let mut label_map = BTreeMap::new();
    label_map.insert(0, "left".to_string());
    label_map.insert(1, "right".to_string());
    Dataset::new(subjects, label_map, TaskKind::MotorImagery)
}

/// Fixed evoked response in latent source space: two damped oscillations on
/// the first two sources, zero elsewhere.
fn erp_template(n_channels: usize, n_samples: usize, fs: f64) -> Array2<f64> {
    let mut template = Array2::<f64>::zeros((n_channels, n_samples));
    let profiles: [(usize, f64, f64, f64); 2] = [
        // (source row, amplitude, center fraction, frequency Hz)
        (0, 2.0, 0.30, 5.0),
        (1, 1.2, 0.45, 7.0),
    ];
    let width = n_samples as f64 / 10.0;
    for &(row, amplitude, center, freq) in &profiles {
        if row >= n_channels {
            continue;
        }
        let t0 = center * n_samples as f64;
        for t in 0..n_samples {
            let dt = t as f64 - t0;
            let envelope = (-0.5 * (dt / width).powi(2)).exp();
            template[[row, t]] =
                amplitude * envelope * (2.0 * std::f64::consts::PI * freq * dt / fs).sin();
        }
    }
    template
}

/// Synthetic ERP dataset with a 1:9 target to non-target ratio.
///
/// Target trials are the shared template plus noise pushed through the
/// subject mixing; non-target trials are mixed noise alone. `label 1` marks
/// targets. No resting trials are generated: ERP reference variants use
/// non-target trials as the resting pool.
pub fn synth_erp(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let a0 = orthogonal_base(config.n_channels, &mut rng)?;
    let template = erp_template(config.n_channels, config.n_samples, config.fs);
    let channel_names: Vec<String> = (0..config.n_channels).map(|i| format!("ch{i:02}")).collect();
    let mut subjects = Vec::with_capacity(config.n_subjects);
    for subject in 1..=config.n_subjects as u32 {
        let gains = mixing_gains(config.n_channels, config.mixing_condition, &mut rng);
        let n_targets = config.n_trials_per_class;
        let n_nontargets = 9 * n_targets;
        let mut trials = Vec::with_capacity(n_targets + n_nontargets);
        for _ in 0..n_targets {
            let noise = gaussian(config.n_channels, config.n_samples, &mut rng);
            let latent = &template + &(noise * config.noise_scale);
            trials.push(Trial::new(
                quantize(mix(&a0, &gains, &latent)),
                config.fs,
                Some(1),
                subject,
                TrialKind::Task,
            )?);
        }
        for _ in 0..n_nontargets {
            let latent = gaussian(config.n_channels, config.n_samples, &mut rng)
                * config.noise_scale;
            trials.push(Trial::new(
                quantize(mix(&a0, &gains, &latent)),
                config.fs,
                Some(0),
                subject,
                TrialKind::Task,
            )?);
        }
        trials.shuffle(&mut rng);
        subjects.push(SubjectRecord::new(
            subject,
            trials,
            vec![],
            channel_names.clone(),
        )?);
    }
    let mut label_map = BTreeMap::new();
    label_map.insert(0, "nontarget".to_string());
    label_map.insert(1, "target".to_string());
    Dataset::new(subjects, label_map, TaskKind::Erp)
}
