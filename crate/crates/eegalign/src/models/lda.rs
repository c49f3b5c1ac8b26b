//! Fisher linear discriminant analysis for two-class feature vectors.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use ndarray_linalg::Solve;

use crate::{Error, Result};

/// Ridge factor applied to the pooled scatter, scaled by its mean diagonal.
const SCATTER_RIDGE: f64 = 1e-6;

/// Linear discriminant learned by [`lda_fit`].
#[derive(Debug, Clone)]
pub struct LdaModel {
    /// Projection weights, one per feature dimension.
    pub weights: Array1<f64>,
    /// Offset placed at the projected midpoint between class means.
    pub bias: f64,
    classes: (u32, u32),
}

impl LdaModel {
    /// The two class labels as `(smaller, larger)`.
    pub fn classes(&self) -> (u32, u32) {
        self.classes
    }

    /// Signed distance of `x` from the decision boundary.
    pub fn decision(&self, x: &ArrayView1<f64>) -> f64 {
        self.weights.dot(x) + self.bias
    }
}

/// Fits a two-class linear discriminant on feature rows.
///
/// The weight direction solves `S_w w = mu_hi - mu_lo` where `S_w` is the
/// pooled within-class scatter with a small ridge added for stability; the
/// bias puts the boundary at the projected midpoint of the class means.
/// Requires exactly two distinct labels with at least two samples each.
pub fn lda_fit(features: &Array2<f64>, labels: &[u32]) -> Result<LdaModel> {
    let (n, d) = features.dim();
    if n == 0 || d == 0 {
        return Err(Error::EmptyInput {
            context: "LDA training features",
        });
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            context: "LDA labels",
            expected: format!("{n} labels"),
            got: format!("{}", labels.len()),
        });
    }

    let mut classes: Vec<u32> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() != 2 {
        return Err(Error::ClassCount {
            context: "LDA training set",
            expected: 2,
            got: classes.len(),
        });
    }
    let (lo, hi) = (classes[0], classes[1]);

    let mut means = Vec::with_capacity(2);
    for &class in &[lo, hi] {
        let rows: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        if rows.len() < 2 {
            return Err(Error::DegenerateData {
                context: format!("LDA class {class} has fewer than two samples"),
            });
        }
        let mut mean = Array1::zeros(d);
        for &i in &rows {
            mean = mean + features.index_axis(Axis(0), i);
        }
        let mean = mean / rows.len() as f64;
        means.push((rows, mean));
    }

    let mut scatter = Array2::<f64>::zeros((d, d));
    for (rows, mean) in &means {
        for &i in rows {
            let centered = &features.index_axis(Axis(0), i) - mean;
            for a in 0..d {
                for b in 0..d {
                    scatter[[a, b]] += centered[a] * centered[b];
                }
            }
        }
    }
    let trace: f64 = scatter.diag().sum();
    if trace <= 0.0 {
        return Err(Error::DegenerateData {
            context: "LDA within-class scatter is zero; all samples coincide".to_string(),
        });
    }
    let ridge = SCATTER_RIDGE * trace / d as f64;
    for a in 0..d {
        scatter[[a, a]] += ridge;
    }

    let separation = &means[1].1 - &means[0].1;
    let weights = scatter.solve(&separation)?;
    let midpoint = (&means[0].1 + &means[1].1) * 0.5;
    let bias = -weights.dot(&midpoint);

    Ok(LdaModel {
        weights,
        bias,
        classes: (lo, hi),
    })
}

/// Classifies a feature vector; a non-positive decision value maps to the
/// smaller class label.
pub fn lda_predict(x: &ArrayView1<f64>, model: &LdaModel) -> u32 {
    if model.decision(x) > 0.0 {
        model.classes.1
    } else {
        model.classes.0
    }
}
