//! Causal FIR band-pass filtering, epoching, downsampling, and ERP trial
//! augmentation.
//!
//! Motor imagery pipelines band-pass the continuous signal with a linear
//! phase FIR filter before cutting trials; ERP pipelines downsample and
//! augment each trial with the class template so covariance matrices capture
//! the evoked response. All operations are pure and per-channel independent.

use ndarray::{concatenate, Array2, Axis};

use crate::data::{Trial, TrialKind};
use crate::{Error, Result};

/// Linear phase FIR band-pass filter.
///
/// Designed by [`design_fir_bandpass`]; the invariants (coefficient symmetry
/// within 1e-12 and half-amplitude response at both band edges within 0.02)
/// are enforced at construction.
#[derive(Clone, Debug)]
pub struct FIRFilter {
    /// `order + 1` coefficients, symmetric around the center tap.
    pub coefficients: Vec<f64>,
    /// Sampling rate the filter was designed for, in Hz.
    pub fs: f64,
    /// Pass band as (low, high) in Hz; edges are the -6 dB points.
    pub band: (f64, f64),
}

impl FIRFilter {
    /// Filter order (number of coefficients minus one).
    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// Amplitude response `|H(f)|` at a frequency in Hz, evaluated directly
    /// from the coefficients.
    pub fn amplitude_response(&self, freq: f64) -> f64 {
        let omega = 2.0 * std::f64::consts::PI * freq / self.fs;
        let (mut re, mut im) = (0.0, 0.0);
        for (n, &c) in self.coefficients.iter().enumerate() {
            let phase = omega * n as f64;
            re += c * phase.cos();
            im -= c * phase.sin();
        }
        (re * re + im * im).sqrt()
    }
}

/// Epoch extraction window relative to an event, plus the trial kind to
/// assign to the cut epochs (task windows and resting windows come from the
/// same recording).
#[derive(Clone, Copy, Debug)]
pub struct EpochSpec {
    /// (start, end) in seconds relative to the event time; end must exceed
    /// start.
    pub window: (f64, f64),
    /// Kind stamped on every produced trial.
    pub kind: TrialKind,
}

impl EpochSpec {
    pub fn new(window: (f64, f64), kind: TrialKind) -> Result<Self> {
        if window.1 <= window.0 || !window.0.is_finite() || !window.1.is_finite() {
            return Err(Error::InvalidParameter {
                name: "window",
                reason: format!("end must exceed start, got [{}, {}]", window.0, window.1),
            });
        }
        Ok(Self { window, kind })
    }
}

/// A continuous multichannel recording that events index into.
#[derive(Clone, Debug)]
pub struct Recording {
    /// One row per channel.
    pub data: Array2<f64>,
    /// Sampling rate in Hz.
    pub fs: f64,
    /// Subject the recording belongs to.
    pub subject: u32,
}

/// An event marker inside a recording.
#[derive(Clone, Copy, Debug)]
pub struct Event {
    /// Event time in seconds from recording start.
    pub time: f64,
    /// Class label carried onto the cut trial.
    pub label: Option<u32>,
}

/// Result of [`epoch`]: successfully cut trials plus per-event failures.
///
/// A window that falls outside the recording only fails its own event; the
/// remaining trials are still returned.
#[derive(Clone, Debug)]
pub struct EpochOutcome {
    pub trials: Vec<Trial>,
    pub failures: Vec<EpochFailure>,
}

/// One event that could not be epoched, with its position and the reason.
#[derive(Clone, Debug)]
pub struct EpochFailure {
    pub event_index: usize,
    pub time: f64,
    pub reason: String,
}

/// Designs a linear phase band-pass filter by the windowed-sinc method with a
/// Hamming window.
///
/// Band edges follow the half-amplitude convention: `|H(low)|` and
/// `|H(high)|` sit at 0.5 (-6 dB). Coefficients are scaled for unit gain at
/// the arithmetic center of the pass band, and the returned filter is
/// validated against the [`FIRFilter`] invariants.
pub fn design_fir_bandpass(order: usize, band: (f64, f64), fs: f64) -> Result<FIRFilter> {
    let (low, high) = band;
    if order == 0 || order % 2 != 0 {
        return Err(Error::InvalidParameter {
            name: "order",
            reason: format!("must be a positive even integer, got {order}"),
        });
    }
    if !(low > 0.0 && high > low && high < fs / 2.0) {
        return Err(Error::InvalidParameter {
            name: "band",
            reason: format!("need 0 < low < high < fs/2, got [{low}, {high}] at fs {fs}"),
        });
    }
    let mid = order / 2;
    let w1 = 2.0 * std::f64::consts::PI * low / fs;
    let w2 = 2.0 * std::f64::consts::PI * high / fs;
    let mut coefficients = vec![0.0; order + 1];
    for n in 0..=mid {
        let k = n as f64 - mid as f64;
        let ideal = if n == mid {
            (w2 - w1) / std::f64::consts::PI
        } else {
            ((w2 * k).sin() - (w1 * k).sin()) / (std::f64::consts::PI * k)
        };
        let window = 0.54
            - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / order as f64).cos();
        coefficients[n] = ideal * window;
        // Mirror the half so symmetry is exact by construction.
        coefficients[order - n] = coefficients[n];
    }
    let mut filter = FIRFilter {
        coefficients,
        fs,
        band,
    };
    let center_gain = filter.amplitude_response((low + high) / 2.0);
    if !center_gain.is_finite() || center_gain <= 0.0 {
        return Err(Error::DegenerateData {
            context: "designed filter has zero gain at the pass band center".into(),
        });
    }
    for c in &mut filter.coefficients {
        *c /= center_gain;
    }
    for edge in [low, high] {
        let gain = filter.amplitude_response(edge);
        if (gain - 0.5).abs() > 0.02 {
            return Err(Error::InvalidParameter {
                name: "band",
                reason: format!(
                    "band edge {edge} Hz has amplitude {gain:.4}, outside 0.5 +/- 0.02; \
                     increase the order or widen the band"
                ),
            });
        }
    }
    Ok(filter)
}

/// Causal direct-form convolution with zero initial state.
///
/// `output[t]` depends only on `input[0..=t]`, and the output length equals
/// the input length, so downstream epoch indices stay valid.
pub fn filter_causal(data: &Array2<f64>, fs: f64, filter: &FIRFilter) -> Result<Array2<f64>> {
    if fs != filter.fs {
        return Err(Error::InvalidParameter {
            name: "fs",
            reason: format!(
                "signal rate {fs} Hz does not match filter design rate {} Hz",
                filter.fs
            ),
        });
    }
    let (channels, samples) = data.dim();
    let mut out = Array2::<f64>::zeros((channels, samples));
    for ch in 0..channels {
        for t in 0..samples {
            let mut acc = 0.0;
            let reach = t.min(filter.coefficients.len() - 1);
            for k in 0..=reach {
                acc += filter.coefficients[k] * data[[ch, t - k]];
            }
            out[[ch, t]] = acc;
        }
    }
    Ok(out)
}

/// Applies [`filter_causal`] to a trial, preserving its metadata.
pub fn filter_trial(trial: &Trial, filter: &FIRFilter) -> Result<Trial> {
    let data = filter_causal(&trial.data, trial.fs, filter)?;
    Trial::new(data, trial.fs, trial.label, trial.subject, trial.kind)
}

/// Cuts one trial per event from a continuous recording.
///
/// Sample indices are pinned as `start = floor(fs * (t + window.start))` and
/// `end = floor(fs * (t + window.end))`, half open, because off-by-one
/// choices here change every downstream covariance. Events whose window
/// falls outside the recording are reported in `failures` without affecting
/// the others.
pub fn epoch(recording: &Recording, events: &[Event], spec: &EpochSpec) -> EpochOutcome {
    let n_samples = recording.data.ncols() as i64;
    let mut trials = Vec::new();
    let mut failures = Vec::new();
    for (event_index, event) in events.iter().enumerate() {
        let start = (recording.fs * (event.time + spec.window.0)).floor() as i64;
        let end = (recording.fs * (event.time + spec.window.1)).floor() as i64;
        if start < 0 || end > n_samples || end <= start {
            failures.push(EpochFailure {
                event_index,
                time: event.time,
                reason: format!(
                    "window maps to samples [{start}, {end}) outside recording of {n_samples}"
                ),
            });
            continue;
        }
        let data = recording
            .data
            .slice(ndarray::s![.., start as usize..end as usize])
            .to_owned();
        match Trial::new(data, recording.fs, event.label, recording.subject, spec.kind) {
            Ok(trial) => trials.push(trial),
            Err(e) => failures.push(EpochFailure {
                event_index,
                time: event.time,
                reason: e.to_string(),
            }),
        }
    }
    EpochOutcome { trials, failures }
}

/// Keeps every `factor`-th sample starting at index 0 and divides the
/// sampling rate accordingly.
///
/// No anti-alias filter is applied here; data that still carries energy
/// above the new Nyquist rate should be low-passed with [`filter_causal`]
/// first.
pub fn downsample(trial: &Trial, factor: usize) -> Result<Trial> {
    if factor < 1 {
        return Err(Error::InvalidParameter {
            name: "factor",
            reason: "must be at least 1".into(),
        });
    }
    if factor == 1 {
        return Ok(trial.clone());
    }
    let data = trial.data.slice(ndarray::s![.., ..;factor]).to_owned();
    Trial::new(
        data,
        trial.fs / factor as f64,
        trial.label,
        trial.subject,
        trial.kind,
    )
}

/// Elementwise mean of a trial set: the ERP template over the given index
/// set.
///
/// The template carries no label; subject and kind are taken from the first
/// trial.
pub fn erp_template(trials: &[Trial]) -> Result<Trial> {
    let first = trials.first().ok_or(Error::EmptyInput {
        context: "erp_template",
    })?;
    let shape = first.data.dim();
    let mut acc = Array2::<f64>::zeros(shape);
    for trial in trials {
        if trial.data.dim() != shape {
            return Err(Error::DimensionMismatch {
                context: "erp_template",
                expected: format!("{}x{}", shape.0, shape.1),
                got: format!("{}x{}", trial.n_channels(), trial.n_samples()),
            });
        }
        acc += &trial.data;
    }
    acc /= trials.len() as f64;
    Trial::new(acc, first.fs, None, first.subject, first.kind)
}

/// Builds the augmented trial `[template; trial]` by vertical concatenation,
/// doubling the channel count. The trial's label and metadata are preserved.
pub fn augment_erp(trial: &Trial, template: &Trial) -> Result<Trial> {
    if trial.data.dim() != template.data.dim() {
        return Err(Error::DimensionMismatch {
            context: "augment_erp",
            expected: format!("{}x{}", template.n_channels(), template.n_samples()),
            got: format!("{}x{}", trial.n_channels(), trial.n_samples()),
        });
    }
    let data = concatenate(Axis(0), &[template.data.view(), trial.data.view()])
        .expect("shapes checked above");
    Trial::new(data, trial.fs, trial.label, trial.subject, trial.kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn paper_filter() -> FIRFilter {
        design_fir_bandpass(50, (8.0, 30.0), 250.0).unwrap()
    }

    #[test]
    fn design_meets_band_edge_contract() {
        let f = paper_filter();
        assert!((f.amplitude_response(8.0) - 0.5).abs() <= 0.02);
        assert!((f.amplitude_response(30.0) - 0.5).abs() <= 0.02);
        assert!(f.amplitude_response(0.0) <= 0.01);
        // Unity gain at the pass band center by construction.
        assert_abs_diff_eq!(f.amplitude_response(19.0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn design_coefficients_are_symmetric() {
        let f = paper_filter();
        let order = f.order();
        for k in 0..=order {
            assert!((f.coefficients[k] - f.coefficients[order - k]).abs() <= 1e-12);
        }
    }

    #[test]
    fn design_rejects_bad_parameters() {
        assert!(design_fir_bandpass(51, (8.0, 30.0), 250.0).is_err());
        assert!(design_fir_bandpass(50, (30.0, 8.0), 250.0).is_err());
        assert!(design_fir_bandpass(50, (8.0, 130.0), 250.0).is_err());
        assert!(design_fir_bandpass(50, (0.0, 30.0), 250.0).is_err());
    }

    #[test]
    fn impulse_response_recovers_coefficients() {
        let f = paper_filter();
        let mut data = Array2::<f64>::zeros((1, 60));
        data[[0, 0]] = 1.0;
        let out = filter_causal(&data, 250.0, &f).unwrap();
        for k in 0..=f.order() {
            assert_abs_diff_eq!(out[[0, k]], f.coefficients[k], epsilon = 1e-15);
        }
        for k in f.order() + 1..60 {
            assert_eq!(out[[0, k]], 0.0);
        }
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let f = paper_filter();
        let data = Array2::<f64>::zeros((3, 100));
        let out = filter_causal(&data, 250.0, &f).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn filtering_is_causal() {
        let f = paper_filter();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let a = Array2::from_shape_fn((2, 200), |_| rng.sample::<f64, _>(StandardNormal));
        let mut b = a.clone();
        // Same prefix, divergent tail.
        for t in 120..200 {
            b[[0, t]] += 5.0;
            b[[1, t]] -= 3.0;
        }
        let fa = filter_causal(&a, 250.0, &f).unwrap();
        let fb = filter_causal(&b, 250.0, &f).unwrap();
        for ch in 0..2 {
            for t in 0..120 {
                assert_eq!(fa[[ch, t]], fb[[ch, t]], "prefix diverged at {t}");
            }
        }
    }

    #[test]
    fn midband_tone_passes_near_unity() {
        let f = paper_filter();
        let freq = (8.0_f64 * 30.0).sqrt();
        let n = 1000;
        let data = Array2::from_shape_fn((1, n), |(_, t)| {
            (2.0 * std::f64::consts::PI * freq * t as f64 / 250.0).sin()
        });
        let out = filter_causal(&data, 250.0, &f).unwrap();
        // Peak amplitude after the filter settles.
        let steady = out
            .slice(ndarray::s![0, 200..])
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!((0.95..=1.05).contains(&steady), "steady amplitude {steady}");
    }

    #[test]
    fn fs_mismatch_is_rejected() {
        let f = paper_filter();
        let data = Array2::<f64>::zeros((1, 10));
        assert!(filter_causal(&data, 128.0, &f).is_err());
    }

    fn ramp_recording(fs: f64, n: usize) -> Recording {
        Recording {
            data: Array2::from_shape_fn((2, n), |(ch, t)| (ch * n + t) as f64),
            fs,
            subject: 1,
        }
    }

    #[test]
    fn epoch_window_arithmetic_matches_paper_cases() {
        let rec = ramp_recording(250.0, 1500);
        let spec = EpochSpec::new((0.5, 3.5), TrialKind::Task).unwrap();
        let out = epoch(&rec, &[Event { time: 1.0, label: Some(1) }], &spec);
        assert!(out.failures.is_empty());
        assert_eq!(out.trials[0].n_samples(), 750);
        assert_eq!(out.trials[0].data[[0, 0]], 375.0);

        let rec64 = ramp_recording(64.0, 100);
        let spec = EpochSpec::new((0.0, 0.7), TrialKind::Task).unwrap();
        let out = epoch(&rec64, &[Event { time: 0.0, label: None }], &spec);
        assert_eq!(out.trials[0].n_samples(), 44);
    }

    #[test]
    fn epoch_reports_out_of_bounds_events_without_dropping_others() {
        let rec = ramp_recording(100.0, 500);
        let spec = EpochSpec::new((0.0, 1.0), TrialKind::Task).unwrap();
        let events = [
            Event { time: 0.5, label: Some(0) },
            Event { time: 4.5, label: Some(1) },
            Event { time: -2.0, label: Some(0) },
        ];
        let out = epoch(&rec, &events, &spec);
        assert_eq!(out.trials.len(), 1);
        assert_eq!(out.failures.len(), 2);
        assert_eq!(out.failures[0].event_index, 1);
        assert_eq!(out.failures[1].event_index, 2);
    }

    #[test]
    fn adjacent_epochs_reassemble_the_recording() {
        let rec = ramp_recording(100.0, 400);
        let spec = EpochSpec::new((0.0, 1.0), TrialKind::Task).unwrap();
        let events: Vec<Event> = (0..4)
            .map(|i| Event { time: i as f64, label: None })
            .collect();
        let out = epoch(&rec, &events, &spec);
        assert!(out.failures.is_empty());
        let glued = concatenate(
            Axis(1),
            &out.trials.iter().map(|t| t.data.view()).collect::<Vec<_>>(),
        )
        .unwrap();
        assert_eq!(glued, rec.data);
    }

    #[test]
    fn epoch_resting_kind_is_stamped() {
        let rec = ramp_recording(100.0, 500);
        let spec = EpochSpec::new((0.25, 1.25), TrialKind::Resting).unwrap();
        let out = epoch(&rec, &[Event { time: 1.0, label: None }], &spec);
        assert_eq!(out.trials[0].kind, TrialKind::Resting);
    }

    #[test]
    fn downsample_decimates_from_index_zero() {
        let data = Array2::from_shape_fn((1, 10), |(_, t)| t as f64);
        let trial = Trial::new(data, 2048.0, Some(1), 1, TrialKind::Task).unwrap();
        let out = downsample(&trial, 3).unwrap();
        assert_eq!(out.data, array![[0.0, 3.0, 6.0, 9.0]]);
        let identity = downsample(&trial, 1).unwrap();
        assert_eq!(identity, trial);
        let rate = downsample(&trial, 32).unwrap();
        assert_eq!(rate.fs, 64.0);
        assert!(downsample(&trial, 0).is_err());
    }

    #[test]
    fn template_is_elementwise_mean() {
        let a = Trial::new(array![[2.0, 4.0]], 64.0, Some(1), 1, TrialKind::Task).unwrap();
        let b = Trial::new(array![[-2.0, -4.0]], 64.0, Some(1), 1, TrialKind::Task).unwrap();
        let zero = erp_template(&[a.clone(), b]).unwrap();
        assert_eq!(zero.data, array![[0.0, 0.0]]);
        let single = erp_template(std::slice::from_ref(&a)).unwrap();
        assert_eq!(single.data, a.data);
        assert_eq!(single.label, None);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials: Vec<Trial> = (0..4)
            .map(|_| {
                let data = Array2::from_shape_fn((2, 3), |_| rng.sample::<f64, _>(StandardNormal));
                Trial::new(data, 64.0, Some(1), 1, TrialKind::Task).unwrap()
            })
            .collect();
        let template = erp_template(&trials).unwrap();
        let mut oracle = Array2::<f64>::zeros((2, 3));
        for t in &trials {
            oracle += &t.data;
        }
        oracle /= 4.0;
        assert_abs_diff_eq!(template.data, oracle, epsilon = 1e-15);
    }

    #[test]
    fn augment_doubles_channels_and_keeps_label() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut mk = || {
            Array2::from_shape_fn((8, 5), |_| rng.sample::<f64, _>(StandardNormal))
        };
        let trial = Trial::new(mk(), 64.0, Some(1), 2, TrialKind::Task).unwrap();
        let template = Trial::new(mk(), 64.0, None, 2, TrialKind::Task).unwrap();
        let out = augment_erp(&trial, &template).unwrap();
        assert_eq!(out.n_channels(), 16);
        assert_eq!(out.label, Some(1));
        assert_eq!(out.data.slice(ndarray::s![..8, ..]), template.data);
        assert_eq!(out.data.slice(ndarray::s![8.., ..]), trial.data);

        let self_aug = augment_erp(&trial, &trial).unwrap();
        assert_eq!(
            self_aug.data.slice(ndarray::s![..8, ..]),
            self_aug.data.slice(ndarray::s![8.., ..])
        );
    }
}
