//! Python bindings for the eegalign library.
//!
//! Exposes the core operations on plain numpy arrays: trial covariances,
//! SPD means and geodesic distances, Euclidean/Riemannian alignment, and
//! the offline/online evaluation protocols on an opaque `Dataset` handle.
//! Evaluation reports round-trip as JSON strings so Python callers can
//! `json.loads` them without a dedicated report type.

use std::collections::BTreeMap;
use std::path::PathBuf;

use ndarray::{Array3, ArrayView2, ArrayView3, Axis};
use numpy::{IntoPyArray, PyArray2, PyArray3, PyReadonlyArray2, PyReadonlyArray3};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use eegalign::alignment::{self, ReferenceKind, ReferenceMatrix, ShrinkageParam};
use eegalign::data::{self, SynthConfig, TaskKind, Trial, TrialKind};
use eegalign::harness::{self, OnlineConfig, PipelineSpec};
use eegalign::spd::{self, SpdMatrix};

fn value_err(err: eegalign::Error) -> PyErr {
    PyValueError::new_err(err.to_string())
}

fn spd_from(view: ArrayView2<'_, f64>) -> PyResult<SpdMatrix> {
    SpdMatrix::new(view.to_owned()).map_err(value_err)
}

fn spd_stack(view: ArrayView3<'_, f64>) -> PyResult<Vec<SpdMatrix>> {
    view.outer_iter().map(spd_from).collect()
}

/// Wraps raw trial data for the alignment functions. The sampling rate is
/// irrelevant to covariance arithmetic, so a placeholder is used.
fn trials_from(view: ArrayView3<'_, f64>) -> PyResult<Vec<Trial>> {
    view.outer_iter()
        .map(|data| {
            Trial::new(data.to_owned(), 1.0, None, 0, TrialKind::Task).map_err(value_err)
        })
        .collect()
}

fn stack_trials<'py>(
    py: Python<'py>,
    trials: &[Trial],
    shape: (usize, usize, usize),
) -> Bound<'py, PyArray3<f64>> {
    let mut out = Array3::zeros(shape);
    for (i, trial) in trials.iter().enumerate() {
        out.index_axis_mut(Axis(0), i).assign(&trial.data);
    }
    out.into_pyarray(py)
}

/// Trial stack plus per-trial labels, as returned to Python.
type LabeledStack<'py> = (Bound<'py, PyArray3<f64>>, Vec<Option<u32>>);

fn parse_kind(kind: &str) -> PyResult<ReferenceKind> {
    match kind {
        "rr" => Ok(ReferenceKind::RR),
        "er" => Ok(ReferenceKind::ER),
        "ri" => Ok(ReferenceKind::RI),
        "ei" => Ok(ReferenceKind::EI),
        other => Err(PyValueError::new_err(format!(
            "unknown reference kind '{other}', expected one of rr, er, ri, ei"
        ))),
    }
}

fn shrink_param(shrinkage: Option<f64>) -> PyResult<ShrinkageParam> {
    match shrinkage {
        None => Ok(ShrinkageParam::none()),
        Some(epsilon) => ShrinkageParam::new(epsilon).map_err(value_err),
    }
}

/// Trial covariance `data @ data.T`, optionally shrunk toward the identity.
#[pyfunction]
#[pyo3(signature = (data, shrinkage=None))]
fn covariance<'py>(
    py: Python<'py>,
    data: PyReadonlyArray2<'py, f64>,
    shrinkage: Option<f64>,
) -> PyResult<Bound<'py, PyArray2<f64>>> {
    let trial = Trial::new(data.as_array().to_owned(), 1.0, None, 0, TrialKind::Task)
        .map_err(value_err)?;
    let cov = alignment::covariance(&trial, shrink_param(shrinkage)?).map_err(value_err)?;
    Ok(cov.into_inner().into_pyarray(py))
}

/// Affine-invariant geodesic distance between two SPD matrices.
#[pyfunction]
fn riemannian_distance(
    a: PyReadonlyArray2<'_, f64>,
    b: PyReadonlyArray2<'_, f64>,
) -> PyResult<f64> {
    spd::riemannian_distance(&spd_from(a.as_array())?, &spd_from(b.as_array())?)
        .map_err(value_err)
}

/// Arithmetic mean of a stack of SPD matrices, shape `(k, n, n)`.
#[pyfunction]
fn arithmetic_mean<'py>(
    py: Python<'py>,
    mats: PyReadonlyArray3<'py, f64>,
) -> PyResult<Bound<'py, PyArray2<f64>>> {
    let mean = spd::arithmetic_mean(&spd_stack(mats.as_array())?).map_err(value_err)?;
    Ok(mean.into_inner().into_pyarray(py))
}

/// Frechet mean of a stack of SPD matrices under the geodesic distance.
#[pyfunction]
#[pyo3(signature = (mats, tol=1e-8, max_iter=50))]
fn riemannian_mean<'py>(
    py: Python<'py>,
    mats: PyReadonlyArray3<'py, f64>,
    tol: f64,
    max_iter: usize,
) -> PyResult<Bound<'py, PyArray2<f64>>> {
    let outcome =
        spd::riemannian_mean(&spd_stack(mats.as_array())?, tol, max_iter).map_err(value_err)?;
    if !outcome.converged {
        return Err(PyValueError::new_err(format!(
            "Riemannian mean did not converge within {max_iter} iterations (delta {:.3e})",
            outcome.delta
        )));
    }
    Ok(outcome.mean.into_inner().into_pyarray(py))
}

/// Reference covariance over a stack of trials, shape `(k, channels, samples)`.
///
/// `kind` picks the mean: "ei"/"er" arithmetic, "ri"/"rr" Riemannian. The
/// caller chooses which trials form the pool (task or resting).
#[pyfunction]
#[pyo3(signature = (trials, kind="ei", shrinkage=None))]
fn build_reference<'py>(
    py: Python<'py>,
    trials: PyReadonlyArray3<'py, f64>,
    kind: &str,
    shrinkage: Option<f64>,
) -> PyResult<Bound<'py, PyArray2<f64>>> {
    let trials = trials_from(trials.as_array())?;
    let reference = alignment::build_reference(&trials, parse_kind(kind)?, shrink_param(shrinkage)?)
        .map_err(value_err)?;
    Ok(reference.matrix.into_inner().into_pyarray(py))
}

/// Euclidean alignment: whitens every trial in the stack by the inverse
/// square root of `reference`.
#[pyfunction]
fn ea_align<'py>(
    py: Python<'py>,
    trials: PyReadonlyArray3<'py, f64>,
    reference: PyReadonlyArray2<'py, f64>,
) -> PyResult<Bound<'py, PyArray3<f64>>> {
    let shape = trials.as_array().dim();
    let trials = trials_from(trials.as_array())?;
    let reference = ReferenceMatrix {
        matrix: spd_from(reference.as_array())?,
        kind: ReferenceKind::EI,
        n_source_trials: trials.len(),
    };
    let aligned = alignment::ea_align(&trials, &reference).map_err(value_err)?;
    Ok(stack_trials(py, &aligned, shape))
}

/// Riemannian alignment: congruence-transforms every covariance in the
/// stack by the inverse square root of `reference`.
#[pyfunction]
fn ra_align<'py>(
    py: Python<'py>,
    covs: PyReadonlyArray3<'py, f64>,
    reference: PyReadonlyArray2<'py, f64>,
) -> PyResult<Bound<'py, PyArray3<f64>>> {
    let shape = covs.as_array().dim();
    let covs = spd_stack(covs.as_array())?;
    let reference = ReferenceMatrix {
        matrix: spd_from(reference.as_array())?,
        kind: ReferenceKind::RI,
        n_source_trials: covs.len(),
    };
    let aligned = alignment::ra_align(&covs, &reference).map_err(value_err)?;
    let mut out = Array3::zeros(shape);
    for (i, cov) in aligned.iter().enumerate() {
        out.index_axis_mut(Axis(0), i).assign(cov.as_array());
    }
    Ok(out.into_pyarray(py))
}

/// In-memory EEG dataset: per-subject trial sequences plus label names.
#[pyclass]
struct Dataset {
    inner: data::Dataset,
}

#[allow(clippy::too_many_arguments)]
fn synth_config(
    n_subjects: usize,
    n_trials_per_class: usize,
    n_channels: usize,
    n_samples: usize,
    fs: f64,
    noise_scale: f64,
    mixing_condition: f64,
    seed: u64,
) -> SynthConfig {
    SynthConfig {
        n_subjects,
        n_trials_per_class,
        n_channels,
        n_samples,
        fs,
        noise_scale,
        mixing_condition,
        seed,
    }
}

#[pymethods]
impl Dataset {
    /// Synthetic two-class motor imagery dataset with per-subject mixing.
    #[staticmethod]
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (n_subjects=8, n_trials_per_class=60, n_channels=8, n_samples=128, fs=128.0, noise_scale=0.5, mixing_condition=5.0, seed=0))]
    fn synth_mi(
        n_subjects: usize,
        n_trials_per_class: usize,
        n_channels: usize,
        n_samples: usize,
        fs: f64,
        noise_scale: f64,
        mixing_condition: f64,
        seed: u64,
    ) -> PyResult<Self> {
        data::synth_mi(&synth_config(
            n_subjects,
            n_trials_per_class,
            n_channels,
            n_samples,
            fs,
            noise_scale,
            mixing_condition,
            seed,
        ))
        .map(|inner| Self { inner })
        .map_err(value_err)
    }

    /// Synthetic target/non-target ERP dataset (1:5 class ratio).
    #[staticmethod]
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (n_subjects=8, n_trials_per_class=20, n_channels=8, n_samples=128, fs=128.0, noise_scale=0.5, mixing_condition=5.0, seed=0))]
    fn synth_erp(
        n_subjects: usize,
        n_trials_per_class: usize,
        n_channels: usize,
        n_samples: usize,
        fs: f64,
        noise_scale: f64,
        mixing_condition: f64,
        seed: u64,
    ) -> PyResult<Self> {
        data::synth_erp(&synth_config(
            n_subjects,
            n_trials_per_class,
            n_channels,
            n_samples,
            fs,
            noise_scale,
            mixing_condition,
            seed,
        ))
        .map(|inner| Self { inner })
        .map_err(value_err)
    }

    /// Loads a dataset archive directory.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        data::load_archive(&path)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    /// Writes the dataset as an archive directory.
    fn save(&self, path: PathBuf) -> PyResult<()> {
        data::save_archive(&self.inner, &path).map_err(value_err)
    }

    /// Task paradigm: "mi" or "erp".
    #[getter]
    fn task(&self) -> &'static str {
        match self.inner.task_kind {
            TaskKind::MotorImagery => "mi",
            TaskKind::Erp => "erp",
        }
    }

    /// Subject ids in storage order.
    #[getter]
    fn subjects(&self) -> Vec<u32> {
        self.inner.subjects.iter().map(|s| s.subject).collect()
    }

    /// Class label names keyed by numeric label.
    #[getter]
    fn labels(&self) -> BTreeMap<u32, String> {
        self.inner.label_map.clone()
    }

    /// Task trials of one subject as `(stack, labels)`: data shaped
    /// `(k, channels, samples)` in recording order, labels as ints or None.
    fn trials<'py>(&self, py: Python<'py>, subject: u32) -> PyResult<LabeledStack<'py>> {
        let record = self.record(subject)?;
        let stack = stack_record(py, &record.trials, "task")?;
        let labels = record.trials.iter().map(|t| t.label).collect();
        Ok((stack, labels))
    }

    /// Resting trials of one subject shaped `(k, channels, samples)`, or
    /// None when the subject has no resting recordings.
    fn resting<'py>(
        &self,
        py: Python<'py>,
        subject: u32,
    ) -> PyResult<Option<Bound<'py, PyArray3<f64>>>> {
        let record = self.record(subject)?;
        if record.resting.is_empty() {
            return Ok(None);
        }
        Ok(Some(stack_record(py, &record.resting, "resting")?))
    }

    fn __len__(&self) -> usize {
        self.inner.subjects.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(task='{}', subjects={}, classes={})",
            self.task(),
            self.inner.subjects.len(),
            self.inner.label_map.len()
        )
    }
}

impl Dataset {
    fn record(&self, subject: u32) -> PyResult<&data::SubjectRecord> {
        self.inner
            .subjects
            .iter()
            .find(|record| record.subject == subject)
            .ok_or_else(|| PyValueError::new_err(format!("no subject {subject} in dataset")))
    }
}

fn stack_record<'py>(
    py: Python<'py>,
    trials: &[Trial],
    what: &str,
) -> PyResult<Bound<'py, PyArray3<f64>>> {
    let Some(first) = trials.first() else {
        return Err(PyValueError::new_err(format!(
            "subject has no {what} trials to stack"
        )));
    };
    let (channels, samples) = (first.n_channels(), first.n_samples());
    if trials
        .iter()
        .any(|t| t.n_channels() != channels || t.n_samples() != samples)
    {
        return Err(PyValueError::new_err(format!(
            "{what} trials have mixed shapes and cannot be stacked"
        )));
    }
    Ok(stack_trials(py, trials, (trials.len(), channels, samples)))
}

fn parse_pipeline(pipeline: &str) -> PyResult<PipelineSpec> {
    serde_json::from_str(pipeline)
        .map_err(|err| PyValueError::new_err(format!("invalid pipeline spec: {err}")))
}

fn report_json(report: &harness::EvalReport) -> PyResult<String> {
    serde_json::to_string_pretty(report)
        .map_err(|err| PyValueError::new_err(format!("report serialization failed: {err}")))
}

/// Leave-one-subject-out offline evaluation.
///
/// `pipeline` is the JSON pipeline spec, e.g.
/// `{"alignment": {"kind": "euclidean", "reference": "ei"}, "chain": {"kind": "csp_lda"}}`.
/// Returns the full evaluation report as a JSON string.
#[pyfunction]
#[pyo3(signature = (dataset, pipeline, seed=0))]
fn loso_eval(dataset: &Dataset, pipeline: &str, seed: u64) -> PyResult<String> {
    let spec = parse_pipeline(pipeline)?;
    let report = harness::loso_eval(&dataset.inner, &spec, seed).map_err(value_err)?;
    report_json(&report)
}

/// Simulated online evaluation with incremental checkpoints.
///
/// The first `pool_size` arrivals of each held-out subject form the online
/// pool; the classifier is scored on the rest at every checkpoint. Returns
/// the full evaluation report as a JSON string.
#[pyfunction]
#[pyo3(signature = (dataset, pipeline, pool_size, first_batch, batch_size, repetitions=1, seed=0))]
fn online_eval(
    dataset: &Dataset,
    pipeline: &str,
    pool_size: usize,
    first_batch: usize,
    batch_size: usize,
    repetitions: usize,
    seed: u64,
) -> PyResult<String> {
    let spec = parse_pipeline(pipeline)?;
    let config = OnlineConfig {
        pool_size,
        first_batch,
        batch_size,
        repetitions,
    };
    let report = harness::online_eval(&dataset.inner, &spec, &config, seed).map_err(value_err)?;
    report_json(&report)
}

#[pymodule]
fn eegalign_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_function(wrap_pyfunction!(covariance, m)?)?;
    m.add_function(wrap_pyfunction!(riemannian_distance, m)?)?;
    m.add_function(wrap_pyfunction!(arithmetic_mean, m)?)?;
    m.add_function(wrap_pyfunction!(riemannian_mean, m)?)?;
    m.add_function(wrap_pyfunction!(build_reference, m)?)?;
    m.add_function(wrap_pyfunction!(ea_align, m)?)?;
    m.add_function(wrap_pyfunction!(ra_align, m)?)?;
    m.add_function(wrap_pyfunction!(loso_eval, m)?)?;
    m.add_function(wrap_pyfunction!(online_eval, m)?)?;
    Ok(())
}
