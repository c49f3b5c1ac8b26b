//! Classifiers and feature extractors for the aligned-trial pipelines.
//!
//! Three chains are supported downstream: minimum distance to Riemannian
//! mean on covariance matrices ([`mdrm`]), CSP log-variance features with LDA
//! ([`csp`], [`lda`]), and xDAWN spatial filtering with PCA features and a
//! linear max-margin classifier ([`xdawn`], [`pca`], [`svm`]).

pub mod csp;
pub mod lda;
pub mod mdrm;
pub mod pca;
pub mod svm;
pub mod xdawn;

pub use csp::{csp_features, csp_fit, CspFilters};
pub use lda::{lda_fit, lda_predict, LdaModel};
pub use mdrm::{mdrm_fit, mdrm_predict, MdrmModel};
pub use pca::{pca_apply, pca_fit, PcaModel};
pub use svm::{select_c, svm_fit, svm_fit_with, svm_predict, CSelection, LinearMarginModel};
pub use xdawn::{xdawn_apply, xdawn_fit, XdawnFilters};
