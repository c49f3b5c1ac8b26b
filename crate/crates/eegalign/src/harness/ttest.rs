//! Paired two-sided Student t-test for comparing per-subject scores.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::{Error, Result};

/// Outcome of [`paired_t_test`].
#[derive(Debug, Clone, Copy)]
pub struct TTestResult {
    /// Test statistic `mean(d) / (sd(d) / sqrt(n))` with sample deviation.
    pub t: f64,
    /// Two-sided p-value under the t distribution with `df` degrees.
    pub p: f64,
    /// Degrees of freedom, `n - 1`.
    pub df: usize,
}

/// Paired two-sided t-test on matched score slices.
///
/// Requires at least two pairs and non-zero variance in the differences.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "paired t-test inputs",
            expected: format!("{} scores", a.len()),
            got: format!("{}", b.len()),
        });
    }
    if a.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "scores",
            reason: format!("paired test needs at least two pairs, got {}", a.len()),
        });
    }

    let n = a.len() as f64;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let variance = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if variance <= 0.0 {
        return Err(Error::DegenerateData {
            context: "paired differences have zero variance".to_string(),
        });
    }

    let t = mean / (variance.sqrt() / n.sqrt());
    let df = a.len() - 1;
    let dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::InvalidParameter {
        name: "df",
        reason: e.to_string(),
    })?;
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok(TTestResult { t, p, df })
}
