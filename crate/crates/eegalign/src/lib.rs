//! Covariance-based alignment and classification pipelines for cross-subject
//! EEG transfer.
//!
//! Multichannel EEG trials are summarized by spatial covariance matrices,
//! which live on the manifold of symmetric positive definite (SPD) matrices.
//! Covariance distributions differ strongly across subjects, so a classifier
//! trained on one group of subjects usually transfers poorly to a new one.
//! This crate implements two alignment strategies that remove most of that
//! shift before any labeled data from the new subject is needed:
//!
//! * **Euclidean alignment** whitens every trial by the inverse square root
//!   of the arithmetic mean covariance of its subject, so each subject's mean
//!   covariance becomes the identity ([`alignment::ea_align`]).
//! * **Riemannian alignment** recenters covariance matrices around a
//!   reference built from resting (or non-target) trials using the geodesic
//!   metric ([`alignment::ra_align`]).
//!
//! On top of the aligned data the crate provides the classification pipelines
//! used to evaluate transfer: minimum distance to Riemannian mean
//! ([`models::mdrm`]), CSP spatial filtering with LDA ([`models::csp`],
//! [`models::lda`]), and xDAWN filtering with PCA features and a linear SVM
//! ([`models::xdawn`], [`models::pca`], [`models::svm`]). The [`harness`]
//! module runs leave-one-subject-out and simulated online evaluations and
//! serializes the results.
//!
//! Deterministic synthetic motor imagery and event-related potential datasets
//! ([`data::synth_mi`], [`data::synth_erp`]) make every protocol exercisable
//! without any recorded EEG.

pub mod alignment;
pub mod data;
pub mod harness;
pub mod models;
pub mod preprocess;
pub mod spd;

mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
