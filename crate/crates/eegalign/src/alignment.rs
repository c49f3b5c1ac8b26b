//! Covariance estimation, reference matrices, and the two alignment
//! operators.
//!
//! Euclidean alignment (EA) whitens raw trials by the inverse square root of
//! a reference covariance, so after alignment with the arithmetic mean
//! reference every subject's mean covariance is the identity. Riemannian
//! alignment (RA) applies the same congruence transform to covariance
//! matrices instead of trials, recentering them around the reference without
//! changing their pairwise geodesic distances.
//!
//! References come in four variants along two axes: the mean type (Euclidean
//! arithmetic mean or Riemannian mean) and the source pool (resting trials or
//! task/imagery trials), abbreviated RR, ER, RI, EI.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::Trial;
use crate::spd::{
    arithmetic_mean, riemannian_mean, spd_power, SpdMatrix, DEFAULT_MEAN_MAX_ITER,
    DEFAULT_MEAN_TOL,
};
use crate::{Error, Result};

/// Shrinkage intensity for covariance estimation.
///
/// Blends the raw covariance toward a scaled identity:
/// `(1 - eps) * S + eps * (trace(S)/R) * I`. Zero keeps the raw estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ShrinkageParam {
    epsilon: f64,
}

impl ShrinkageParam {
    /// Validates `0 <= epsilon < 1`.
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: format!("shrinkage must be in [0, 1), got {epsilon}"),
            });
        }
        Ok(Self { epsilon })
    }

    /// No shrinkage.
    pub fn none() -> Self {
        Self { epsilon: 0.0 }
    }

    /// Default policy: raw covariance when there are at least as many samples
    /// as channels, light shrinkage (0.01) otherwise, where `X X^T` is
    /// guaranteed rank deficient.
    pub fn auto_for(n_channels: usize, n_samples: usize) -> Self {
        if n_samples >= n_channels {
            Self { epsilon: 0.0 }
        } else {
            Self { epsilon: 0.01 }
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// How a reference matrix was estimated: mean type x source pool.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReferenceKind {
    /// Riemannian mean of resting-trial covariances.
    #[serde(rename = "rr")]
    RR,
    /// Euclidean (arithmetic) mean of resting-trial covariances.
    #[serde(rename = "er")]
    ER,
    /// Riemannian mean of task-trial covariances.
    #[serde(rename = "ri")]
    RI,
    /// Euclidean (arithmetic) mean of task-trial covariances.
    #[serde(rename = "ei")]
    EI,
}

impl ReferenceKind {
    /// True for the arithmetic-mean variants (ER, EI).
    pub fn is_euclidean(&self) -> bool {
        matches!(self, ReferenceKind::ER | ReferenceKind::EI)
    }

    /// True for the variants built from resting trials (RR, ER).
    pub fn uses_resting(&self) -> bool {
        matches!(self, ReferenceKind::RR | ReferenceKind::ER)
    }
}

/// A reference covariance tagged with how it was built.
#[derive(Clone, Debug)]
pub struct ReferenceMatrix {
    pub matrix: SpdMatrix,
    pub kind: ReferenceKind,
    /// Number of trials the estimate was built from.
    pub n_source_trials: usize,
}

/// Trial covariance `X X^T` with optional shrinkage.
///
/// There is deliberately no `1/n_samples` factor and no mean removal: all
/// downstream consumers (geodesic distances, MDRM, CSP, EA) are invariant to
/// a common positive scaling, so the raw product is kept.
pub fn covariance(trial: &Trial, shrink: ShrinkageParam) -> Result<SpdMatrix> {
    let raw = trial.data.dot(&trial.data.t());
    let dim = raw.nrows();
    let eps = shrink.epsilon();
    let blended = if eps > 0.0 {
        let trace: f64 = raw.diag().sum();
        let mut out = raw * (1.0 - eps);
        let ridge = eps * trace / dim as f64;
        for i in 0..dim {
            out[[i, i]] += ridge;
        }
        out
    } else {
        raw
    };
    SpdMatrix::new(blended).map_err(|e| match e {
        Error::NotPositiveDefinite { .. } => Error::NotPositiveDefinite {
            detail: format!(
                "trial covariance is rank deficient ({} channels, {} samples); \
                 use a positive shrinkage",
                trial.n_channels(),
                trial.n_samples()
            ),
        },
        other => other,
    })
}

/// Covariance of each trial under one shrinkage setting.
pub fn covariances(trials: &[Trial], shrink: ShrinkageParam) -> Result<Vec<SpdMatrix>> {
    trials.iter().map(|t| covariance(t, shrink)).collect()
}

/// Builds a reference matrix from a trial pool.
///
/// The caller selects the pool to match the kind: resting trials for RR/ER,
/// task trials for RI/EI. In the supervised ERP setting, passing only
/// non-target trials with a Riemannian kind reproduces the non-target
/// reference. Euclidean kinds take the arithmetic mean of the covariances;
/// Riemannian kinds take the Frechet mean with the module default tolerance
/// and fail if it does not converge.
pub fn build_reference(
    trials: &[Trial],
    kind: ReferenceKind,
    shrink: ShrinkageParam,
) -> Result<ReferenceMatrix> {
    if trials.is_empty() {
        return Err(Error::EmptyInput {
            context: "build_reference",
        });
    }
    let covs = covariances(trials, shrink)?;
    let matrix = if kind.is_euclidean() {
        arithmetic_mean(&covs)?
    } else {
        let outcome = riemannian_mean(&covs, DEFAULT_MEAN_TOL, DEFAULT_MEAN_MAX_ITER)?;
        if !outcome.converged {
            return Err(Error::NonConvergence {
                what: format!("Riemannian mean for {kind:?} reference"),
                iterations: outcome.iterations,
            });
        }
        outcome.mean
    };
    Ok(ReferenceMatrix {
        matrix,
        kind,
        n_source_trials: trials.len(),
    })
}

/// Euclidean alignment: left-multiplies every trial by the inverse square
/// root of the reference.
///
/// Labels, order, and metadata are preserved. With the EI reference built
/// from the same trials, the mean covariance of the output is the identity.
pub fn ea_align(trials: &[Trial], reference: &ReferenceMatrix) -> Result<Vec<Trial>> {
    let whitener = spd_power(&reference.matrix, -0.5)?;
    trials
        .iter()
        .map(|trial| {
            if trial.n_channels() != reference.matrix.dim() {
                return Err(Error::DimensionMismatch {
                    context: "ea_align",
                    expected: format!("{} channels", reference.matrix.dim()),
                    got: format!("{} channels", trial.n_channels()),
                });
            }
            Trial::new(
                whitener.as_array().dot(&trial.data),
                trial.fs,
                trial.label,
                trial.subject,
                trial.kind,
            )
        })
        .collect()
}

/// Riemannian alignment: congruence-transforms every covariance by the
/// inverse square root of the reference.
///
/// Pairwise geodesic distances among the outputs equal those among the
/// inputs, so this recenters the set without distorting it.
pub fn ra_align(covs: &[SpdMatrix], reference: &ReferenceMatrix) -> Result<Vec<SpdMatrix>> {
    let whitener = spd_power(&reference.matrix, -0.5)?;
    let w = whitener.as_array();
    covs.iter()
        .map(|cov| {
            if cov.dim() != reference.matrix.dim() {
                return Err(Error::DimensionMismatch {
                    context: "ra_align",
                    expected: format!("{0}x{0}", reference.matrix.dim()),
                    got: format!("{0}x{0}", cov.dim()),
                });
            }
            let aligned = w.dot(cov.as_array()).dot(w);
            Ok(SpdMatrix::trusted((&aligned + &aligned.t()) * 0.5))
        })
        .collect()
}

/// Running update of an arithmetic-mean (EI) reference with newly observed
/// trials, weighted by trial counts.
///
/// Matches rebuilding from scratch over the union within accumulation
/// roundoff. The simulated online protocol uses this to grow the new
/// subject's reference as labeled trials arrive.
pub fn incremental_reference(
    prev: &ReferenceMatrix,
    new_trials: &[Trial],
    shrink: ShrinkageParam,
) -> Result<ReferenceMatrix> {
    if prev.kind != ReferenceKind::EI {
        return Err(Error::InvalidParameter {
            name: "prev",
            reason: format!(
                "incremental updates are defined for the EI kind, got {:?}",
                prev.kind
            ),
        });
    }
    if new_trials.is_empty() {
        return Ok(prev.clone());
    }
    let dim = prev.matrix.dim();
    let mut acc: Array2<f64> = prev.matrix.as_array() * prev.n_source_trials as f64;
    for trial in new_trials {
        if trial.n_channels() != dim {
            return Err(Error::DimensionMismatch {
                context: "incremental_reference",
                expected: format!("{dim} channels"),
                got: format!("{} channels", trial.n_channels()),
            });
        }
        acc += covariance(trial, shrink)?.as_array();
    }
    let total = prev.n_source_trials + new_trials.len();
    acc /= total as f64;
    Ok(ReferenceMatrix {
        matrix: SpdMatrix::new(acc)?,
        kind: ReferenceKind::EI,
        n_source_trials: total,
    })
}
