//! Linear soft-margin support vector classification.
//!
//! The dual problem is solved with sequential minimal optimisation using
//! maximal-violating-pair working set selection. Convergence is certified by
//! the duality gap: the primal objective (evaluated at the hinge-optimal
//! bias) minus the dual objective.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::prelude::*;
use rand_chacha::ChaCha20Rng;

use crate::{Error, Result};

/// Duality gap at which [`svm_fit`] declares convergence.
pub const DEFAULT_GAP_TOL: f64 = 1e-6;
/// Pair-update budget used by [`svm_fit`].
pub const DEFAULT_MAX_UPDATES: usize = 1_000_000;
/// Violating-pair threshold below which the iterate is treated as a KKT point.
const KKT_EPS: f64 = 1e-12;

/// Linear decision function learned by [`svm_fit`].
#[derive(Debug, Clone)]
pub struct LinearMarginModel {
    /// Weight vector, one entry per feature dimension.
    pub weights: Array1<f64>,
    /// Bias term.
    pub bias: f64,
    /// Hinge-loss trade-off the model was trained with.
    pub c: f64,
    /// Certified duality gap at termination.
    pub duality_gap: f64,
    classes: (u32, u32),
}

impl LinearMarginModel {
    /// The two class labels as `(smaller, larger)`.
    pub fn classes(&self) -> (u32, u32) {
        self.classes
    }

    /// Signed distance of `x` from the decision boundary.
    pub fn decision(&self, x: &ArrayView1<f64>) -> f64 {
        self.weights.dot(x) + self.bias
    }
}

struct Problem<'a> {
    features: &'a Array2<f64>,
    y: Vec<f64>,
    gram: Array2<f64>,
    c: f64,
}

impl Problem<'_> {
    fn n(&self) -> usize {
        self.y.len()
    }

    /// Margin slack bounds on the bias from the current gradient, as
    /// `(max over I_up, min over I_low)` of `y_i - f_i`.
    fn bias_bracket(&self, alpha: &[f64], f: &[f64]) -> (f64, f64) {
        let mut up = f64::NEG_INFINITY;
        let mut low = f64::INFINITY;
        for i in 0..self.n() {
            let slack = self.y[i] - f[i];
            let positive = self.y[i] > 0.0;
            if (positive && alpha[i] < self.c) || (!positive && alpha[i] > 0.0) {
                up = up.max(slack);
            }
            if (positive && alpha[i] > 0.0) || (!positive && alpha[i] < self.c) {
                low = low.min(slack);
            }
        }
        (up, low)
    }

    /// Hinge-optimal bias for fixed scores `f`: the midpoint of the flat
    /// segment of the piecewise-linear hinge sum.
    fn hinge_optimal_bias(&self, f: &[f64]) -> f64 {
        let mut kinks: Vec<f64> = (0..self.n()).map(|i| self.y[i] - f[i]).collect();
        kinks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n_pos = self.y.iter().filter(|&&v| v > 0.0).count();
        0.5 * (kinks[n_pos - 1] + kinks[n_pos])
    }

    /// Primal minus dual objective, with the primal evaluated at the
    /// hinge-optimal bias.
    fn duality_gap(&self, alpha: &[f64], f: &[f64]) -> f64 {
        let weighted: f64 = (0..self.n()).map(|i| alpha[i] * self.y[i] * f[i]).sum();
        let bias = self.hinge_optimal_bias(f);
        let hinge: f64 = (0..self.n())
            .map(|i| (1.0 - self.y[i] * (f[i] + bias)).max(0.0))
            .sum();
        let alpha_sum: f64 = alpha.iter().sum();
        (weighted + self.c * hinge - alpha_sum).max(0.0)
    }

    /// Recomputes the weight vector and scores from the dual variables.
    fn refresh(&self, alpha: &[f64]) -> (Array1<f64>, Vec<f64>) {
        let coeff =
            Array1::from_iter((0..self.n()).map(|i| alpha[i] * self.y[i]));
        let weights = self.features.t().dot(&coeff);
        let f = self.features.dot(&weights).to_vec();
        (weights, f)
    }
}

/// Fits a linear soft-margin classifier with the default duality gap
/// tolerance and update budget.
pub fn svm_fit(features: &Array2<f64>, labels: &[u32], c: f64) -> Result<LinearMarginModel> {
    svm_fit_with(features, labels, c, DEFAULT_GAP_TOL, DEFAULT_MAX_UPDATES)
}

/// Fits a linear soft-margin classifier, stopping once the duality gap falls
/// to `gap_tol` or erroring after `max_updates` pair updates.
///
/// The smaller class label maps to the negative side of the boundary, the
/// larger one to the positive side.
pub fn svm_fit_with(
    features: &Array2<f64>,
    labels: &[u32],
    c: f64,
    gap_tol: f64,
    max_updates: usize,
) -> Result<LinearMarginModel> {
    let (n, d) = features.dim();
    if n == 0 || d == 0 {
        return Err(Error::EmptyInput {
            context: "SVM training features",
        });
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            context: "SVM labels",
            expected: format!("{n} labels"),
            got: format!("{}", labels.len()),
        });
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidParameter {
            name: "c",
            reason: format!("must be a positive finite number, got {c}"),
        });
    }
    if !(gap_tol.is_finite() && gap_tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "gap_tol",
            reason: format!("must be a positive finite number, got {gap_tol}"),
        });
    }

    let mut classes: Vec<u32> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() != 2 {
        return Err(Error::ClassCount {
            context: "SVM training set",
            expected: 2,
            got: classes.len(),
        });
    }
    let (lo, hi) = (classes[0], classes[1]);

    let problem = Problem {
        features,
        y: labels
            .iter()
            .map(|&l| if l == hi { 1.0 } else { -1.0 })
            .collect(),
        gram: features.dot(&features.t()),
        c,
    };

    let mut alpha = vec![0.0; n];
    let mut f = vec![0.0; n];
    let mut updates = 0usize;
    let check_every = n.max(128);
    let mut since_check = 0usize;

    let gap = loop {
        // Maximal violating pair.
        let mut i_best: Option<(usize, f64)> = None;
        let mut j_best: Option<(usize, f64)> = None;
        for t in 0..n {
            let slack = problem.y[t] - f[t];
            let positive = problem.y[t] > 0.0;
            let can_raise = (positive && alpha[t] < c) || (!positive && alpha[t] > 0.0);
            if can_raise && i_best.map_or(true, |(_, s)| slack > s) {
                i_best = Some((t, slack));
            }
            let can_lower = (positive && alpha[t] > 0.0) || (!positive && alpha[t] < c);
            if can_lower && j_best.map_or(true, |(_, s)| slack < s) {
                j_best = Some((t, slack));
            }
        }
        let ((i, slack_i), (j, slack_j)) = match (i_best, j_best) {
            (Some(a), Some(b)) => (a, b),
            _ => break problem.duality_gap(&alpha, &f),
        };
        let violation = slack_i - slack_j;
        if violation <= KKT_EPS {
            break problem.duality_gap(&alpha, &f);
        }

        let curvature =
            (problem.gram[[i, i]] + problem.gram[[j, j]] - 2.0 * problem.gram[[i, j]]).max(1e-12);
        let room_i = if problem.y[i] > 0.0 { c - alpha[i] } else { alpha[i] };
        let room_j = if problem.y[j] > 0.0 { alpha[j] } else { c - alpha[j] };
        let step = (violation / curvature).min(room_i).min(room_j);
        if step <= 0.0 {
            break problem.duality_gap(&alpha, &f);
        }

        alpha[i] += problem.y[i] * step;
        alpha[j] -= problem.y[j] * step;
        for (t, ft) in f.iter_mut().enumerate() {
            *ft += step * (problem.gram[[t, i]] - problem.gram[[t, j]]);
        }
        updates += 1;
        since_check += 1;

        if since_check >= check_every || updates >= max_updates {
            since_check = 0;
            let (_, fresh) = problem.refresh(&alpha);
            f = fresh;
            let gap = problem.duality_gap(&alpha, &f);
            if gap <= gap_tol {
                break gap;
            }
            if updates >= max_updates {
                return Err(Error::NonConvergence {
                    what: format!("SVM duality gap {gap:.3e} above tolerance {gap_tol:.3e}"),
                    iterations: updates,
                });
            }
        }
    };

    let (weights, f) = problem.refresh(&alpha);
    if gap > gap_tol {
        return Err(Error::NonConvergence {
            what: format!("SVM duality gap {gap:.3e} above tolerance {gap_tol:.3e}"),
            iterations: updates,
        });
    }
    let (up, low) = problem.bias_bracket(&alpha, &f);
    let bias = 0.5 * (up + low);

    Ok(LinearMarginModel {
        weights,
        bias,
        c,
        duality_gap: gap,
        classes: (lo, hi),
    })
}

/// Classifies a feature vector; a non-positive decision value maps to the
/// smaller class label.
pub fn svm_predict(x: &ArrayView1<f64>, model: &LinearMarginModel) -> u32 {
    if model.decision(x) > 0.0 {
        model.classes.1
    } else {
        model.classes.0
    }
}

/// Outcome of [`select_c`]: the winning value and the mean balanced accuracy
/// of every candidate.
#[derive(Debug, Clone)]
pub struct CSelection {
    /// Selected trade-off value.
    pub c: f64,
    /// `(candidate, mean balanced accuracy)` for the whole grid, ascending.
    pub scores: Vec<(f64, f64)>,
}

/// Picks the hinge trade-off `C` from the grid `2^-3 ..= 2^5` by stratified
/// five-fold cross-validation, scoring candidates by mean balanced accuracy.
///
/// Folds are built per class with a seeded shuffle and round-robin
/// assignment, so results are reproducible for a given seed. Ties resolve to
/// the smallest candidate. Each class needs at least five samples.
pub fn select_c(features: &Array2<f64>, labels: &[u32], seed: u64) -> Result<CSelection> {
    const FOLDS: usize = 5;
    let n = features.nrows();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            context: "C selection labels",
            expected: format!("{n} labels"),
            got: format!("{}", labels.len()),
        });
    }
    let mut classes: Vec<u32> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() != 2 {
        return Err(Error::ClassCount {
            context: "C selection training set",
            expected: 2,
            got: classes.len(),
        });
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; n];
    for &class in &classes {
        let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        if members.len() < FOLDS {
            return Err(Error::InvalidParameter {
                name: "labels",
                reason: format!(
                    "class {class} has {} samples but stratified {FOLDS}-fold selection needs {FOLDS}",
                    members.len()
                ),
            });
        }
        members.shuffle(&mut rng);
        for (position, &row) in members.iter().enumerate() {
            fold_of[row] = position % FOLDS;
        }
    }

    let grid: Vec<f64> = (-3..=5).map(|e| 2f64.powi(e)).collect();
    let mut scores = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64)> = None;
    for &candidate in &grid {
        let mut fold_scores = Vec::with_capacity(FOLDS);
        for fold in 0..FOLDS {
            let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != fold).collect();
            let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == fold).collect();
            let train_features = features.select(Axis(0), &train);
            let train_labels: Vec<u32> = train.iter().map(|&i| labels[i]).collect();
            let model = svm_fit(&train_features, &train_labels, candidate)?;

            let mut hits = [0usize; 2];
            let mut totals = [0usize; 2];
            for &i in &test {
                let side = (labels[i] == classes[1]) as usize;
                totals[side] += 1;
                if svm_predict(&features.row(i), &model) == labels[i] {
                    hits[side] += 1;
                }
            }
            let balanced = 0.5
                * (hits[0] as f64 / totals[0] as f64 + hits[1] as f64 / totals[1] as f64);
            fold_scores.push(balanced);
        }
        let mean = fold_scores.iter().sum::<f64>() / FOLDS as f64;
        scores.push((candidate, mean));
        if best.map_or(true, |(_, s)| mean > s) {
            best = Some((candidate, mean));
        }
    }

    Ok(CSelection {
        c: best.unwrap().0,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use rand_distr::StandardNormal;

    fn two_points() -> (Array2<f64>, Vec<u32>) {
        (arr2(&[[1.0, 0.0], [-1.0, 0.0]]), vec![1, 0])
    }

    fn six_points() -> (Array2<f64>, Vec<u32>) {
        (
            arr2(&[
                [1.2, 0.7],
                [2.3, -0.4],
                [1.9, 1.1],
                [-0.8, -1.3],
                [-1.4, 0.2],
                [-2.1, -0.9],
            ]),
            vec![1, 1, 1, 0, 0, 0],
        )
    }

    fn separable_clouds(seed: u64, n_per_class: usize) -> (Array2<f64>, Vec<u32>) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for class in 0..2u32 {
            let center = if class == 0 { -2.0 } else { 2.0 };
            for _ in 0..n_per_class {
                rows.push([
                    center + 0.4 * rng.sample::<f64, _>(StandardNormal),
                    0.4 * rng.sample::<f64, _>(StandardNormal),
                ]);
                labels.push(class);
            }
        }
        (
            Array2::from_shape_fn((rows.len(), 2), |(i, j)| rows[i][j]),
            labels,
        )
    }

    #[test]
    fn hard_margin_two_point_solution() {
        let (features, labels) = two_points();
        let model = svm_fit_with(&features, &labels, 10.0, 1e-12, 100_000).unwrap();
        assert!((model.weights[0] - 1.0).abs() < 1e-5);
        assert!(model.weights[1].abs() < 1e-9);
        assert!(model.bias.abs() < 1e-9);
    }

    #[test]
    fn capped_two_point_solution() {
        // Both multipliers saturate at C, giving w = 2 C e1 and zero bias.
        let (features, labels) = two_points();
        let model = svm_fit_with(&features, &labels, 0.1, 1e-12, 100_000).unwrap();
        assert!((model.weights[0] - 0.2).abs() < 1e-7);
        assert!(model.weights[1].abs() < 1e-9);
        assert!(model.bias.abs() < 1e-9);
    }

    #[test]
    fn six_point_reference_solution() {
        let (features, labels) = six_points();
        let expected_decisions = [
            1.0,
            1.4714285714285715,
            1.6142857142857143,
            -1.0,
            -1.0,
            -1.8142857142857143,
        ];
        for c in [0.5, 8.0] {
            let model = svm_fit_with(&features, &labels, c, 1e-10, 500_000).unwrap();
            assert!((model.weights[0] - 5.0 / 7.0).abs() < 1e-4, "c={c}");
            assert!((model.weights[1] - 2.0 / 7.0).abs() < 1e-4, "c={c}");
            assert!((model.bias + 2.0 / 35.0).abs() < 1e-4, "c={c}");
            for (row, expected) in features.rows().into_iter().zip(expected_decisions) {
                assert!((model.decision(&row) - expected).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn duplicated_samples_match_doubled_c() {
        let (features, labels) = six_points();
        let doubled = ndarray::concatenate![Axis(0), features.clone(), features.clone()];
        let doubled_labels: Vec<u32> = labels.iter().chain(&labels).cloned().collect();

        let twice_c = svm_fit_with(&features, &labels, 2.0, 1e-12, 500_000).unwrap();
        let duplicated = svm_fit_with(&doubled, &doubled_labels, 1.0, 1e-12, 500_000).unwrap();
        for (a, b) in twice_c.weights.iter().zip(&duplicated.weights) {
            assert!((a - b).abs() < 1e-5);
        }
        assert!((twice_c.bias - duplicated.bias).abs() < 1e-5);
    }

    #[test]
    fn separable_data_reaches_zero_hinge_loss() {
        let (features, labels) = separable_clouds(3, 20);
        let model = svm_fit_with(&features, &labels, 100.0, 1e-8, 500_000).unwrap();
        for (row, &label) in features.rows().into_iter().zip(&labels) {
            let y = if label == 1 { 1.0 } else { -1.0 };
            assert!(y * model.decision(&row) >= 1.0 - 1e-3);
            assert_eq!(svm_predict(&row, &model), label);
        }
    }

    #[test]
    fn certified_gap_brackets_the_known_primal_optimum() {
        // At the six-point optimum w = (5/7, 2/7), b = -2/35 the hinge loss
        // vanishes, so the optimal primal objective is |w|^2 / 2 = 29/98.
        let (features, labels) = six_points();
        let optimum = 29.0 / 98.0;
        let model = svm_fit_with(&features, &labels, 8.0, 1e-12, 500_000).unwrap();
        assert!(model.duality_gap <= 1e-12);

        let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let half_norm = 0.5 * model.weights.dot(&model.weights);
        let hinge: f64 = features
            .rows()
            .into_iter()
            .zip(&y)
            .map(|(row, &yi)| (1.0 - yi * model.decision(&row)).max(0.0))
            .sum();
        let primal = half_norm + model.c * hinge;
        assert!(primal >= optimum - 1e-12, "primal {primal} below optimum");
        assert!(primal <= optimum + 1e-6, "primal {primal} not near optimum");
    }

    #[test]
    fn class_mapping_follows_label_order() {
        let features = arr2(&[[1.0, 0.0], [1.1, 0.0], [-1.0, 0.0], [-1.2, 0.0]]);
        let labels = vec![9, 9, 4, 4];
        let model = svm_fit(&features, &labels, 1.0).unwrap();
        assert_eq!(model.classes(), (4, 9));
        assert_eq!(svm_predict(&ndarray::arr1(&[2.0, 0.0]).view(), &model), 9);
        assert_eq!(svm_predict(&ndarray::arr1(&[-2.0, 0.0]).view(), &model), 4);
        // The boundary itself resolves to the smaller label.
        assert_eq!(svm_predict(&ndarray::arr1(&[0.0, 5.0]).view(), &model), 4);
    }

    #[test]
    fn tiny_update_budget_reports_nonconvergence() {
        let (features, labels) = six_points();
        assert!(matches!(
            svm_fit_with(&features, &labels, 8.0, 1e-13, 2),
            Err(Error::NonConvergence { .. })
        ));
    }

    #[test]
    fn rejects_invalid_training_sets() {
        let (features, labels) = two_points();
        assert!(matches!(
            svm_fit(&features, &[1, 1], 1.0),
            Err(Error::ClassCount { .. })
        ));
        assert!(matches!(
            svm_fit(&features, &labels, 0.0),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            svm_fit(&features, &[1], 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn c_selection_scores_whole_grid_and_is_deterministic() {
        let (features, labels) = separable_clouds(11, 12);
        let first = select_c(&features, &labels, 42).unwrap();
        let second = select_c(&features, &labels, 42).unwrap();
        assert_eq!(first.scores.len(), 9);
        assert!((first.scores[0].0 - 0.125).abs() < 1e-15);
        assert!((first.scores[8].0 - 32.0).abs() < 1e-15);
        assert_eq!(first.c, second.c);
        for (a, b) in first.scores.iter().zip(&second.scores) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn c_selection_breaks_ties_toward_smaller_values() {
        // Widely separated clouds: every candidate scores a perfect balanced
        // accuracy, so the smallest grid value must win.
        let (features, labels) = separable_clouds(13, 10);
        let selection = select_c(&features, &labels, 7).unwrap();
        assert!((selection.c - 0.125).abs() < 1e-15);
        assert!(selection.scores.iter().all(|&(_, s)| (s - 1.0).abs() < 1e-12));
    }

    #[test]
    fn c_selection_requires_five_samples_per_class() {
        let features = arr2(&[[1.0, 0.0], [1.1, 0.0], [-1.0, 0.0], [-1.2, 0.0]]);
        assert!(matches!(
            select_c(&features, &[1, 1, 0, 0], 1),
            Err(Error::InvalidParameter { .. })
        ));
    }
}
