//! Principal component features with per-dimension standardisation and
//! min-max output scaling.
//!
//! Fitting z-scores each input dimension, projects onto the top principal
//! directions of the standardised training data, and rescales each projected
//! feature so the training values span `[0, 1]`. Test projections reuse the
//! training ranges and are deliberately not clamped.

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::spd::sym_eig;
use crate::{Error, Result};

/// Relative threshold below which a dimension counts as constant.
const VARIANCE_FLOOR: f64 = 1e-12;

/// Standardisation, projection, and scaling state learned by [`pca_fit`].
#[derive(Debug, Clone)]
pub struct PcaModel {
    /// Per-dimension training mean (all input dimensions).
    pub mean: Array1<f64>,
    /// Per-dimension training standard deviation (all input dimensions).
    pub std: Array1<f64>,
    /// Input dimensions kept after dropping constant ones.
    pub kept: Vec<usize>,
    /// Input dimensions dropped for having no variance.
    pub dropped: Vec<usize>,
    /// Principal directions, one per row (`k x kept.len()`).
    pub components: Array2<f64>,
    /// Per-feature minimum of the projected training data.
    pub feature_min: Array1<f64>,
    /// Per-feature range (max minus min) of the projected training data.
    pub feature_range: Array1<f64>,
}

impl PcaModel {
    /// Number of output features.
    pub fn n_features(&self) -> usize {
        self.components.nrows()
    }

    /// Number of input dimensions the model was fitted on.
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }
}

/// Fits a `k`-component PCA feature extractor on feature rows.
///
/// Constant input dimensions are dropped and recorded in the model. Requires
/// at least `k` samples and at least `k` non-constant dimensions.
pub fn pca_fit(features: &Array2<f64>, k: usize) -> Result<PcaModel> {
    let (n, d) = features.dim();
    if n == 0 || d == 0 {
        return Err(Error::EmptyInput {
            context: "PCA training features",
        });
    }
    if k == 0 {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: "at least one component is required".to_string(),
        });
    }
    if n < k {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: format!("{k} components requested from only {n} samples"),
        });
    }

    let mean = features.mean_axis(Axis(0)).unwrap();
    let centered = features - &mean;
    let std = centered
        .map_axis(Axis(0), |col| (col.dot(&col) / n as f64).sqrt());

    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..d {
        if std[j] > VARIANCE_FLOOR * (1.0 + mean[j].abs()) {
            kept.push(j);
        } else {
            dropped.push(j);
        }
    }
    if kept.len() < k {
        return Err(Error::DegenerateData {
            context: format!(
                "PCA needs {k} informative dimensions but only {} vary",
                kept.len()
            ),
        });
    }

    let mut z = Array2::zeros((n, kept.len()));
    for (col, &j) in kept.iter().enumerate() {
        let scaled = centered.column(j).mapv(|v| v / std[j]);
        z.column_mut(col).assign(&scaled);
    }

    let cov = z.t().dot(&z) / (n as f64 - 1.0).max(1.0);
    let eig = sym_eig(&cov)?;
    let components = eig
        .eigenvectors
        .slice(ndarray::s![.., ..k])
        .t()
        .to_owned();

    let projected = z.dot(&components.t());
    let feature_min = projected.map_axis(Axis(0), |col| {
        col.iter().cloned().fold(f64::INFINITY, f64::min)
    });
    let feature_max = projected.map_axis(Axis(0), |col| {
        col.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    });
    let feature_range = &feature_max - &feature_min;

    Ok(PcaModel {
        mean,
        std,
        kept,
        dropped,
        components,
        feature_min,
        feature_range,
    })
}

/// Standardises, projects, and min-max scales one feature vector.
///
/// Outputs are not clamped: values outside the training range map outside
/// `[0, 1]`. Features whose training range was zero map to 0.
pub fn pca_apply(x: &ArrayView1<f64>, model: &PcaModel) -> Result<Array1<f64>> {
    if x.len() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "PCA projection",
            expected: format!("{} dimensions", model.input_dim()),
            got: format!("{}", x.len()),
        });
    }
    let z = Array1::from_iter(
        model
            .kept
            .iter()
            .map(|&j| (x[j] - model.mean[j]) / model.std[j]),
    );
    let projected = model.components.dot(&z);
    let mut scaled = Array1::zeros(model.n_features());
    for i in 0..model.n_features() {
        scaled[i] = if model.feature_range[i] > 0.0 {
            (projected[i] - model.feature_min[i]) / model.feature_range[i]
        } else {
            0.0
        };
    }
    Ok(scaled)
}
