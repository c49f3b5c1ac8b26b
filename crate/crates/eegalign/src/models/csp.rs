//! Common spatial patterns for two-class oscillatory discrimination.
//!
//! CSP solves the generalised eigenvalue problem `S1 v = lambda (S1 + S2) v`
//! for the two class-mean covariances and keeps the filters whose eigenvalues
//! are furthest from 0.5, i.e. the directions with the most discriminative
//! variance ratio. Features are log mean-square amplitudes of the filtered
//! signals.

use ndarray::{Array1, Array2};

use crate::alignment::{covariance, ShrinkageParam};
use crate::data::Trial;
use crate::spd::{arithmetic_mean, spd_power, sym_eig, SpdMatrix};
use crate::{Error, Result};

/// Spatial filter bank learned by [`csp_fit`].
#[derive(Debug, Clone)]
pub struct CspFilters {
    /// Filter matrix, one filter per row (`n_filters x n_channels`).
    pub filters: Array2<f64>,
    /// Generalised eigenvalue of each kept filter, in row order.
    pub eigenvalues: Vec<f64>,
    /// Index of each kept filter in the descending eigenvalue spectrum.
    pub selected: Vec<usize>,
}

impl CspFilters {
    /// Number of spatial filters.
    pub fn n_filters(&self) -> usize {
        self.filters.nrows()
    }
}

fn class_mean_covariance(
    trials: &[&Trial],
    shrink: ShrinkageParam,
) -> Result<SpdMatrix> {
    let covs = trials
        .iter()
        .map(|t| covariance(t, shrink))
        .collect::<Result<Vec<_>>>()?;
    arithmetic_mean(&covs)
}

/// Learns `n_filters` CSP filters from labelled trials.
///
/// Exactly two distinct labels must be present and every trial must carry
/// one. `n_filters` must be even, keeping `n_filters / 2` filters from each
/// end of the eigenvalue spectrum; rows are ordered by discriminability
/// (distance of the eigenvalue from 0.5, descending). Filters have unit norm
/// under the composite covariance metric.
pub fn csp_fit(trials: &[Trial], n_filters: usize, shrink: ShrinkageParam) -> Result<CspFilters> {
    if trials.is_empty() {
        return Err(Error::EmptyInput {
            context: "CSP training trials",
        });
    }
    if n_filters < 2 || n_filters % 2 != 0 {
        return Err(Error::InvalidParameter {
            name: "n_filters",
            reason: format!("must be an even number of at least 2, got {n_filters}"),
        });
    }
    let n_channels = trials[0].n_channels();
    if n_filters > n_channels {
        return Err(Error::InvalidParameter {
            name: "n_filters",
            reason: format!("{n_filters} filters requested but trials have {n_channels} channels"),
        });
    }

    let mut labels: Vec<u32> = Vec::new();
    for trial in trials {
        let label = trial.label.ok_or_else(|| Error::LabelsRequired {
            context: "CSP training".to_string(),
        })?;
        if !labels.contains(&label) {
            labels.push(label);
        }
    }
    if labels.len() != 2 {
        return Err(Error::ClassCount {
            context: "CSP training set",
            expected: 2,
            got: labels.len(),
        });
    }
    labels.sort_unstable();

    let split: Vec<Vec<&Trial>> = labels
        .iter()
        .map(|&l| trials.iter().filter(|t| t.label == Some(l)).collect())
        .collect();
    let mean_low = class_mean_covariance(&split[0], shrink)?;
    let mean_high = class_mean_covariance(&split[1], shrink)?;

    let composite = SpdMatrix::new(mean_low.as_array() + mean_high.as_array())?;
    let whitener = match spd_power(&composite, -0.5) {
        Ok(w) => w.into_inner(),
        Err(Error::IllConditioned { lambda_min, floor }) => {
            return Err(Error::DegenerateData {
                context: format!(
                    "composite class covariance is near singular (smallest eigenvalue {lambda_min:.3e}, floor {floor:.3e}); increase shrinkage"
                ),
            })
        }
        Err(e) => return Err(e),
    };

    let whitened = whitener.dot(mean_low.as_array()).dot(&whitener);
    let whitened = (&whitened + &whitened.t()) * 0.5;
    let eig = sym_eig(&whitened)?;

    let half = n_filters / 2;
    let mut selected: Vec<usize> = (0..half).chain(n_channels - half..n_channels).collect();
    selected.sort_by(|&a, &b| {
        let da = (eig.eigenvalues[a] - 0.5).abs();
        let db = (eig.eigenvalues[b] - 0.5).abs();
        db.partial_cmp(&da).unwrap()
    });

    let mut filters = Array2::zeros((n_filters, n_channels));
    let mut eigenvalues = Vec::with_capacity(n_filters);
    for (row, &idx) in selected.iter().enumerate() {
        let direction = whitener.dot(&eig.eigenvectors.column(idx));
        filters.row_mut(row).assign(&direction);
        eigenvalues.push(eig.eigenvalues[idx]);
    }

    Ok(CspFilters {
        filters,
        eigenvalues,
        selected,
    })
}

/// Projects a trial through the filter bank and returns log-variance features.
///
/// The k-th feature is `ln(mean square of the k-th filtered signal)`.
pub fn csp_features(trial: &Trial, filters: &CspFilters) -> Result<Array1<f64>> {
    if filters.filters.ncols() != trial.n_channels() {
        return Err(Error::DimensionMismatch {
            context: "CSP feature extraction",
            expected: format!("{} channels", filters.filters.ncols()),
            got: format!("{}", trial.n_channels()),
        });
    }
    let projected = filters.filters.dot(&trial.data);
    let n_samples = trial.n_samples() as f64;
    let mut features = Array1::zeros(filters.filters.nrows());
    for (k, row) in projected.rows().into_iter().enumerate() {
        let mean_square = row.iter().map(|v| v * v).sum::<f64>() / n_samples;
        if !(mean_square.is_finite() && mean_square > 0.0) {
            return Err(Error::DegenerateData {
                context: format!("CSP filter {k} produced a zero or non-finite variance"),
            });
        }
        features[k] = mean_square.ln();
    }
    Ok(features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::TrialKind;
    use ndarray::arr2;
    use rand::prelude::*;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::StandardNormal;

    fn trial_from(data: Array2<f64>, label: u32) -> Trial {
        Trial::new(data, 100.0, Some(label), 1, TrialKind::Task).unwrap()
    }

    fn axis_trials() -> Vec<Trial> {
        // Covariances diag(4, 1) for class 0 and diag(1, 4) for class 1.
        vec![
            trial_from(arr2(&[[2.0, 0.0], [0.0, 1.0]]), 0),
            trial_from(arr2(&[[1.0, 0.0], [0.0, 2.0]]), 1),
        ]
    }

    fn random_trials(rng: &mut ChaCha20Rng, n_per_class: usize, channels: usize) -> Vec<Trial> {
        let mut trials = Vec::new();
        for label in 0..2u32 {
            for _ in 0..n_per_class {
                let mut data =
                    Array2::from_shape_fn((channels, 64), |_| rng.sample::<f64, _>(StandardNormal));
                let boosted = label as usize;
                data.row_mut(boosted).mapv_inplace(|v| 3.0 * v);
                trials.push(trial_from(data, label));
            }
        }
        trials
    }

    #[test]
    fn axis_aligned_case_recovers_known_eigenvalues_and_filters() {
        let filters = csp_fit(&axis_trials(), 2, ShrinkageParam::none()).unwrap();
        // Both eigenvalues tie in discriminability, so locate rows by value.
        let hi = filters
            .eigenvalues
            .iter()
            .position(|l| (l - 0.8).abs() < 1e-12)
            .unwrap();
        let lo = filters
            .eigenvalues
            .iter()
            .position(|l| (l - 0.2).abs() < 1e-12)
            .unwrap();
        // Composite covariance is diag(5, 5); unit norm under it means 1/sqrt(5).
        let scale = 1.0 / 5.0_f64.sqrt();
        assert!((filters.filters[[hi, 0]].abs() - scale).abs() < 1e-12);
        assert!(filters.filters[[hi, 1]].abs() < 1e-12);
        assert!(filters.filters[[lo, 0]].abs() < 1e-12);
        assert!((filters.filters[[lo, 1]].abs() - scale).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_stay_in_open_unit_interval() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let trials = random_trials(&mut rng, 6, 4);
        let filters = csp_fit(&trials, 4, ShrinkageParam::none()).unwrap();
        for &lambda in &filters.eigenvalues {
            assert!(lambda > 0.0 && lambda < 1.0);
        }
    }

    #[test]
    fn equal_class_covariances_give_half_eigenvalues() {
        let data = arr2(&[[1.0, 2.0, -1.0, 0.5], [0.3, -0.7, 1.1, 0.9]]);
        let trials = vec![
            trial_from(data.clone(), 0),
            trial_from(data.clone(), 1),
        ];
        let filters = csp_fit(&trials, 2, ShrinkageParam::none()).unwrap();
        for &lambda in &filters.eigenvalues {
            assert!((lambda - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_norm_under_composite_covariance_metric() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let trials = random_trials(&mut rng, 5, 5);
        let filters = csp_fit(&trials, 4, ShrinkageParam::none()).unwrap();

        let mut composite = Array2::<f64>::zeros((5, 5));
        for label in 0..2u32 {
            let class: Vec<SpdMatrix> = trials
                .iter()
                .filter(|t| t.label == Some(label))
                .map(|t| covariance(t, ShrinkageParam::none()).unwrap())
                .collect();
            composite += arithmetic_mean(&class).unwrap().as_array();
        }
        for row in filters.filters.rows() {
            let norm = row.dot(&composite.dot(&row));
            assert!((norm - 1.0).abs() < 1e-9, "norm {norm}");
        }
    }

    #[test]
    fn swapping_labels_mirrors_eigenvalues_and_keeps_directions() {
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let trials = random_trials(&mut rng, 6, 3);
        let swapped: Vec<Trial> = trials
            .iter()
            .map(|t| {
                let mut s = t.clone();
                s.label = Some(1 - t.label.unwrap());
                s
            })
            .collect();
        let original = csp_fit(&trials, 2, ShrinkageParam::none()).unwrap();
        let mirrored = csp_fit(&swapped, 2, ShrinkageParam::none()).unwrap();

        let mut a: Vec<f64> = original.eigenvalues.clone();
        let mut b: Vec<f64> = mirrored.eigenvalues.iter().map(|l| 1.0 - l).collect();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }

        // Same filter directions appear, possibly in a different row order.
        for row in original.filters.rows() {
            let matched = mirrored.filters.rows().into_iter().any(|other| {
                let dot = row.dot(&other).abs();
                let norms = row.dot(&row).sqrt() * other.dot(&other).sqrt();
                (dot / norms - 1.0).abs() < 1e-7
            });
            assert!(matched);
        }
    }

    #[test]
    fn global_rescaling_keeps_filter_directions() {
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        let trials = random_trials(&mut rng, 5, 4);
        let scaled: Vec<Trial> = trials
            .iter()
            .map(|t| {
                let mut s = t.clone();
                s.data.mapv_inplace(|v| 2.5 * v);
                s
            })
            .collect();
        let base = csp_fit(&trials, 4, ShrinkageParam::none()).unwrap();
        let rescaled = csp_fit(&scaled, 4, ShrinkageParam::none()).unwrap();
        for (row_a, row_b) in base.filters.rows().into_iter().zip(rescaled.filters.rows()) {
            let norm_a = row_a.dot(&row_a).sqrt();
            let norm_b = row_b.dot(&row_b).sqrt();
            for (a, b) in row_a.iter().zip(row_b) {
                assert!((a.abs() / norm_a - b.abs() / norm_b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn features_shift_by_log_square_under_rescaling() {
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let trials = random_trials(&mut rng, 5, 4);
        let filters = csp_fit(&trials, 4, ShrinkageParam::none()).unwrap();
        let base = csp_features(&trials[0], &filters).unwrap();
        let mut scaled = trials[0].clone();
        scaled.data.mapv_inplace(|v| 3.0 * v);
        let shifted = csp_features(&scaled, &filters).unwrap();
        for (a, b) in base.iter().zip(&shifted) {
            assert!((b - a - 2.0 * 3.0_f64.ln()).abs() < 1e-10);
        }
    }

    #[test]
    fn unit_variance_projections_give_near_zero_features() {
        let mut rng = ChaCha20Rng::seed_from_u64(25);
        let data = Array2::from_shape_fn((3, 40_000), |_| rng.sample::<f64, _>(StandardNormal));
        let trial = trial_from(data, 0);
        let identity = CspFilters {
            filters: Array2::eye(3),
            eigenvalues: vec![0.5; 3],
            selected: vec![0, 1, 2],
        };
        let features = csp_features(&trial, &identity).unwrap();
        for f in &features {
            assert!(f.abs() < 0.05, "feature {f}");
        }
    }

    #[test]
    fn rejects_bad_filter_counts_labels_and_classes() {
        let trials = axis_trials();
        assert!(matches!(
            csp_fit(&trials, 3, ShrinkageParam::none()),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            csp_fit(&trials, 4, ShrinkageParam::none()),
            Err(Error::InvalidParameter { .. })
        ));

        let mut unlabeled = trials.clone();
        unlabeled[0].label = None;
        assert!(matches!(
            csp_fit(&unlabeled, 2, ShrinkageParam::none()),
            Err(Error::LabelsRequired { .. })
        ));

        let mut three_classes = trials.clone();
        three_classes.push(trial_from(arr2(&[[1.0, 0.5], [0.5, 1.0]]), 2));
        assert!(matches!(
            csp_fit(&three_classes, 2, ShrinkageParam::none()),
            Err(Error::ClassCount { .. })
        ));
    }

    #[test]
    fn zero_projection_is_reported_as_degenerate() {
        let trial = trial_from(arr2(&[[0.0, 0.0], [1.0, -1.0]]), 0);
        let filters = CspFilters {
            filters: Array2::eye(2),
            eigenvalues: vec![0.5; 2],
            selected: vec![0, 1],
        };
        assert!(matches!(
            csp_features(&trial, &filters),
            Err(Error::DegenerateData { .. })
        ));
    }
}
