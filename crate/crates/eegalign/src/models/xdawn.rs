//! xDAWN spatial filtering for event-related potential enhancement.
//!
//! xDAWN finds spatial filters that maximise the ratio of evoked-response
//! energy to total signal energy: the generalised eigenvalue problem between
//! the covariance of the averaged target response and the mean covariance of
//! all trials.

use ndarray::Array2;

use crate::alignment::{covariance, ShrinkageParam};
use crate::data::{Trial, TrialKind};
use crate::spd::{arithmetic_mean, spd_power, sym_eig};
use crate::{Error, Result};

/// Spatial filter bank learned by [`xdawn_fit`].
#[derive(Debug, Clone)]
pub struct XdawnFilters {
    /// Filter matrix, one filter per row (`n_components x n_channels`).
    pub filters: Array2<f64>,
    /// Averaged target response the filters were trained on.
    pub template: Array2<f64>,
    /// Generalised eigenvalue (evoked-to-total energy ratio) per filter row.
    pub eigenvalues: Vec<f64>,
    /// Label treated as the target class.
    pub target_label: u32,
}

/// Learns `n_components` xDAWN filters from labelled trials.
///
/// Exactly two distinct labels must be present; the larger one is treated as
/// the target class. Filters are orthonormal under the mean total covariance
/// and ordered by decreasing evoked-energy ratio.
pub fn xdawn_fit(
    trials: &[Trial],
    n_components: usize,
    shrink: ShrinkageParam,
) -> Result<XdawnFilters> {
    if trials.is_empty() {
        return Err(Error::EmptyInput {
            context: "xDAWN training trials",
        });
    }
    let n_channels = trials[0].n_channels();
    let n_samples = trials[0].n_samples();
    if n_components == 0 || n_components > n_channels {
        return Err(Error::InvalidParameter {
            name: "n_components",
            reason: format!(
                "must be between 1 and the channel count {n_channels}, got {n_components}"
            ),
        });
    }
    if trials
        .iter()
        .any(|t| t.n_channels() != n_channels || t.n_samples() != n_samples)
    {
        return Err(Error::DimensionMismatch {
            context: "xDAWN training trials",
            expected: format!("{n_channels}x{n_samples}"),
            got: "mixed trial shapes".to_string(),
        });
    }

    let mut labels: Vec<u32> = Vec::new();
    for trial in trials {
        let label = trial.label.ok_or_else(|| Error::LabelsRequired {
            context: "xDAWN training".to_string(),
        })?;
        if !labels.contains(&label) {
            labels.push(label);
        }
    }
    if labels.len() != 2 {
        return Err(Error::ClassCount {
            context: "xDAWN training set",
            expected: 2,
            got: labels.len(),
        });
    }
    let target_label = *labels.iter().max().unwrap();

    let targets: Vec<&Trial> = trials
        .iter()
        .filter(|t| t.label == Some(target_label))
        .collect();
    let mut template = Array2::<f64>::zeros((n_channels, n_samples));
    for trial in &targets {
        template += &trial.data;
    }
    template /= targets.len() as f64;

    let template_trial = Trial::new(
        template.clone(),
        trials[0].fs,
        None,
        trials[0].subject,
        TrialKind::Task,
    )?;
    let evoked_cov = covariance(&template_trial, shrink)?;
    let covs = trials
        .iter()
        .map(|t| covariance(t, shrink))
        .collect::<Result<Vec<_>>>()?;
    let total_cov = arithmetic_mean(&covs)?;

    let whitener = match spd_power(&total_cov, -0.5) {
        Ok(w) => w.into_inner(),
        Err(Error::IllConditioned { lambda_min, floor }) => {
            return Err(Error::DegenerateData {
                context: format!(
                    "mean total covariance is near singular (smallest eigenvalue {lambda_min:.3e}, floor {floor:.3e}); increase shrinkage"
                ),
            })
        }
        Err(e) => return Err(e),
    };
    let whitened = whitener.dot(evoked_cov.as_array()).dot(&whitener);
    let whitened = (&whitened + &whitened.t()) * 0.5;
    let eig = sym_eig(&whitened)?;

    let mut filters = Array2::zeros((n_components, n_channels));
    for row in 0..n_components {
        let direction = whitener.dot(&eig.eigenvectors.column(row));
        filters.row_mut(row).assign(&direction);
    }

    Ok(XdawnFilters {
        filters,
        template,
        eigenvalues: eig.eigenvalues.iter().take(n_components).cloned().collect(),
        target_label,
    })
}

/// Projects a trial through the filter bank, keeping its metadata.
pub fn xdawn_apply(trial: &Trial, filters: &XdawnFilters) -> Result<Trial> {
    if filters.filters.ncols() != trial.n_channels() {
        return Err(Error::DimensionMismatch {
            context: "xDAWN projection",
            expected: format!("{} channels", filters.filters.ncols()),
            got: format!("{}", trial.n_channels()),
        });
    }
    Trial::new(
        filters.filters.dot(&trial.data),
        trial.fs,
        trial.label,
        trial.subject,
        trial.kind,
    )
}
