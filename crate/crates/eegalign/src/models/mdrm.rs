//! Minimum distance to Riemannian mean classification.
//!
//! Each class is summarised by the Riemannian mean of its training
//! covariance matrices; a test covariance is assigned to the class whose
//! mean is closest in geodesic distance.

use std::collections::BTreeMap;

use crate::spd::{riemannian_distance, riemannian_mean, SpdMatrix, DEFAULT_MEAN_MAX_ITER, DEFAULT_MEAN_TOL};
use crate::{Error, Result};

/// Per-class Riemannian means learned from training covariances.
#[derive(Debug, Clone)]
pub struct MdrmModel {
    class_means: BTreeMap<u32, SpdMatrix>,
}

impl MdrmModel {
    /// Class labels and their mean covariance matrices, ordered by label.
    pub fn class_means(&self) -> &BTreeMap<u32, SpdMatrix> {
        &self.class_means
    }

    /// Matrix dimension shared by all class means.
    pub fn dim(&self) -> usize {
        self.class_means
            .values()
            .next()
            .map(|m| m.dim())
            .unwrap_or(0)
    }
}

/// Computes the Riemannian mean of each class of training covariances.
///
/// `covariances` and `labels` are parallel slices. At least two distinct
/// labels are required, and every class mean must converge.
pub fn mdrm_fit(covariances: &[SpdMatrix], labels: &[u32]) -> Result<MdrmModel> {
    if covariances.is_empty() {
        return Err(Error::EmptyInput {
            context: "MDRM training covariances",
        });
    }
    if covariances.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "MDRM labels",
            expected: format!("{} labels", covariances.len()),
            got: format!("{}", labels.len()),
        });
    }
    let dim = covariances[0].dim();
    if covariances.iter().any(|c| c.dim() != dim) {
        return Err(Error::DimensionMismatch {
            context: "MDRM training covariances",
            expected: format!("{dim}x{dim}"),
            got: "mixed matrix dimensions".to_string(),
        });
    }

    let mut by_class: BTreeMap<u32, Vec<SpdMatrix>> = BTreeMap::new();
    for (cov, &label) in covariances.iter().zip(labels) {
        by_class.entry(label).or_default().push(cov.clone());
    }
    if by_class.len() < 2 {
        return Err(Error::ClassCount {
            context: "MDRM training set",
            expected: 2,
            got: by_class.len(),
        });
    }

    let mut class_means = BTreeMap::new();
    for (label, covs) in by_class {
        let mean = riemannian_mean(&covs, DEFAULT_MEAN_TOL, DEFAULT_MEAN_MAX_ITER)?;
        if !mean.converged {
            return Err(Error::NonConvergence {
                what: format!("Riemannian mean for class {label}"),
                iterations: mean.iterations,
            });
        }
        class_means.insert(label, mean.mean);
    }
    Ok(MdrmModel { class_means })
}

/// Assigns `covariance` to the class with the nearest Riemannian mean.
///
/// Ties in geodesic distance resolve to the smallest class label.
pub fn mdrm_predict(covariance: &SpdMatrix, model: &MdrmModel) -> Result<u32> {
    let mut best: Option<(u32, f64)> = None;
    for (&label, mean) in &model.class_means {
        let dist = riemannian_distance(covariance, mean)?;
        match best {
            Some((_, d)) if dist >= d => {}
            _ => best = Some((label, dist)),
        }
    }
    best.map(|(label, _)| label).ok_or(Error::EmptyInput {
        context: "MDRM model has no class means",
    })
}
