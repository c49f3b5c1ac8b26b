use std::path::PathBuf;

use thiserror::Error;

/// Unified error type for every fallible operation in the crate.
///
/// All variants render as a single line so command line tools can forward
/// them verbatim to stderr.
#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    /// A matrix expected to be symmetric deviated beyond tolerance.
    #[error("matrix is not symmetric: max |a_ij - a_ji| = {max_asymmetry:.3e} exceeds {tolerance:.3e}")]
    NotSymmetric { max_asymmetry: f64, tolerance: f64 },

    /// A matrix expected to be positive definite failed validation.
    #[error("matrix is not positive definite: {detail}")]
    NotPositiveDefinite { detail: String },

    /// Two operands disagree on dimensions, or an input has an unusable shape.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    /// A matrix is too close to singular for the requested inverse power.
    #[error("matrix is ill-conditioned: smallest eigenvalue {lambda_min:.3e} is below floor {floor:.3e}")]
    IllConditioned { lambda_min: f64, floor: f64 },

    /// An operation that needs at least one element received none.
    #[error("empty input: {context} requires at least one element")]
    EmptyInput { context: &'static str },

    /// A parameter value is outside its documented domain.
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// An iterative solver exhausted its budget without meeting tolerance.
    #[error("{what} did not converge within {iterations} iterations")]
    NonConvergence { what: String, iterations: usize },

    /// Input data is degenerate in a way that makes the result undefined.
    #[error("degenerate data: {context}")]
    DegenerateData { context: String },

    /// An operation needs trial labels that are absent.
    #[error("labels required: {context}")]
    LabelsRequired { context: String },

    /// A resting-state reference was requested for a subject without resting trials.
    #[error("subject {subject} has no resting trials to build the requested reference")]
    NoRestingTrials { subject: u32 },

    /// The requested alignment and model combination is not defined.
    #[error("unsupported pipeline: {reason}")]
    UnsupportedPipeline { reason: String },

    /// A classifier or metric received the wrong number of distinct classes.
    #[error("{context} expects {expected} classes, got {got}")]
    ClassCount {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A dataset archive is missing, truncated, or structurally invalid.
    #[error("archive error at {path}: {reason}")]
    Archive { path: PathBuf, reason: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// A LAPACK-backed factorization failed.
    #[error("linear algebra error: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),
}
