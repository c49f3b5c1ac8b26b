//! Symmetric positive definite matrix geometry.
//!
//! Spatial covariance matrices of EEG trials are SPD, and both the Riemannian
//! alignment reference and the minimum distance classifier operate on the SPD
//! manifold under the affine-invariant metric. This module provides the
//! validated [`SpdMatrix`] wrapper plus the spectral operations everything
//! else is built from: matrix powers, logarithm and exponential, the geodesic
//! distance, and arithmetic and Riemannian (Frechet) means.

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{Cholesky, Eigh, UPLO};

use crate::{Error, Result};

/// Relative Frobenius tolerance for accepting a nearly symmetric matrix.
///
/// Inputs with `||A - A^T||_F <= SYMMETRY_TOL * ||A||_F` are symmetrized as
/// `(A + A^T) / 2`; anything beyond that is rejected rather than silently
/// rounded.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Relative eigenvalue floor for inverse powers and logarithms.
///
/// An eigenvalue below `EIG_FLOOR * lambda_max` makes `M^{-1/2}` or `log M`
/// numerically meaningless, so those operations fail loudly instead of
/// amplifying noise.
pub const EIG_FLOOR: f64 = 1e-12;

/// Default convergence tolerance for [`riemannian_mean`].
pub const DEFAULT_MEAN_TOL: f64 = 1e-9;

/// Default iteration budget for [`riemannian_mean`].
pub const DEFAULT_MEAN_MAX_ITER: usize = 50;

/// A validated symmetric positive definite matrix.
///
/// Construction symmetrizes the input and proves positive definiteness with a
/// Cholesky factorization, so downstream spectral operations can assume a
/// well-formed operand.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdMatrix {
    data: Array2<f64>,
}

impl SpdMatrix {
    /// Validates and wraps a matrix.
    ///
    /// The input must be square with finite entries, symmetric within
    /// [`SYMMETRY_TOL`] (relative Frobenius), and positive definite. Small
    /// asymmetry from floating point accumulation is repaired by averaging
    /// with the transpose.
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let (rows, cols) = data.dim();
        if rows != cols || rows == 0 {
            return Err(Error::DimensionMismatch {
                context: "SpdMatrix::new",
                expected: "nonempty square matrix".into(),
                got: format!("{rows}x{cols}"),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NotPositiveDefinite {
                detail: "matrix contains non-finite entries".into(),
            });
        }
        check_symmetry(&data, "SpdMatrix::new")?;
        let sym = symmetrize(&data);
        if sym.cholesky(UPLO::Lower).is_err() {
            return Err(Error::NotPositiveDefinite {
                detail: "Cholesky factorization failed".into(),
            });
        }
        Ok(Self { data: sym })
    }

    /// Wraps a matrix already known to be SPD by construction.
    ///
    /// Used internally for outputs of spectral recompositions, where positive
    /// eigenvalues are guaranteed and a second Cholesky would only burn time.
    pub(crate) fn trusted(data: Array2<f64>) -> Self {
        debug_assert!(data.is_square());
        Self { data }
    }

    /// Side length of the matrix.
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    /// Borrows the underlying array.
    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }

    /// Consumes the wrapper and returns the underlying array.
    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }
}

/// Eigendecomposition of a symmetric matrix with a deterministic layout.
///
/// Eigenvalues are sorted in descending order and `eigenvectors` stores the
/// matching eigenvector in each column. Every column is normalized so that
/// its first component of non-negligible magnitude is positive, which pins
/// the sign ambiguity and makes repeated decompositions reproducible.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub eigenvalues: Array1<f64>,
    pub eigenvectors: Array2<f64>,
}

impl EigenDecomposition {
    /// Rebuilds `V f(diag) V^T` with `f` applied to each eigenvalue.
    pub(crate) fn recompose(&self, f: impl Fn(f64) -> f64) -> Array2<f64> {
        let scaled = self.eigenvalues.mapv(f);
        let weighted = &self.eigenvectors * &scaled.view().insert_axis(ndarray::Axis(0));
        symmetrize(&weighted.dot(&self.eigenvectors.t()))
    }

    /// Errors unless every eigenvalue clears the relative conditioning floor.
    fn require_conditioning(&self) -> Result<()> {
        let lambda_max = self.eigenvalues[0];
        let lambda_min = self.eigenvalues[self.eigenvalues.len() - 1];
        let floor = EIG_FLOOR * lambda_max.max(f64::MIN_POSITIVE);
        if lambda_min < floor {
            return Err(Error::IllConditioned { lambda_min, floor });
        }
        Ok(())
    }
}

/// Result of [`riemannian_mean`], carrying convergence diagnostics.
///
/// Non-convergence is reported through `converged` instead of an error
/// because a slightly loose mean is still usable; callers that need a strict
/// guarantee check the flag.
#[derive(Clone, Debug)]
pub struct RiemannianMean {
    /// The estimated Frechet mean.
    pub mean: SpdMatrix,
    /// Number of fixed point iterations performed.
    pub iterations: usize,
    /// Frobenius norm of the final tangent space step.
    pub delta: f64,
    /// Whether `delta` reached the requested tolerance within budget.
    pub converged: bool,
}

/// Averages a matrix with its transpose.
fn symmetrize(a: &Array2<f64>) -> Array2<f64> {
    (a + &a.t()) * 0.5
}

/// Frobenius norm.
fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Rejects matrices whose asymmetry exceeds [`SYMMETRY_TOL`] relative Frobenius.
fn check_symmetry(a: &Array2<f64>, _context: &'static str) -> Result<()> {
    let norm = frobenius(a).max(f64::MIN_POSITIVE);
    let asym = frobenius(&(a - &a.t()));
    let tolerance = SYMMETRY_TOL * norm;
    if asym > tolerance {
        return Err(Error::NotSymmetric {
            max_asymmetry: asym,
            tolerance,
        });
    }
    Ok(())
}

/// Eigendecomposition of a symmetric matrix.
///
/// Validates shape and symmetry, then returns eigenvalues in descending order
/// with sign-normalized eigenvector columns (see [`EigenDecomposition`]).
/// The input does not need to be positive definite; logarithm and exponential
/// of tangent space matrices rely on the indefinite case.
pub fn sym_eig(a: &Array2<f64>) -> Result<EigenDecomposition> {
    let (rows, cols) = a.dim();
    if rows != cols || rows == 0 {
        return Err(Error::DimensionMismatch {
            context: "sym_eig",
            expected: "nonempty square matrix".into(),
            got: format!("{rows}x{cols}"),
        });
    }
    check_symmetry(a, "sym_eig")?;
    let (vals, vecs) = symmetrize(a).eigh(UPLO::Lower)?;
    // LAPACK returns ascending eigenvalues; flip to descending.
    let eigenvalues = Array1::from_iter(vals.iter().rev().copied());
    let mut eigenvectors = vecs.slice(s![.., ..;-1]).to_owned();
    for mut col in eigenvectors.columns_mut() {
        let col_scale = col.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let pivot = col.iter().find(|v| v.abs() > 1e-12 * col_scale);
        if matches!(pivot, Some(v) if *v < 0.0) {
            col.mapv_inplace(|v| -v);
        }
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Raises an SPD matrix to a real power through its eigendecomposition.
///
/// Negative powers require every eigenvalue to clear the [`EIG_FLOOR`]
/// conditioning floor; otherwise the inverse would amplify noise past any
/// useful precision and the call fails with an ill-conditioned error.
pub fn spd_power(p: &SpdMatrix, alpha: f64) -> Result<SpdMatrix> {
    let eig = sym_eig(p.as_array())?;
    if alpha < 0.0 {
        eig.require_conditioning()?;
    }
    Ok(SpdMatrix::trusted(
        eig.recompose(|v| v.max(0.0).powf(alpha)),
    ))
}

/// Matrix logarithm of an SPD matrix. The result is symmetric but in general
/// indefinite, so it is returned as a plain array.
///
/// Subject to the same conditioning floor as negative powers, since the
/// logarithm diverges at zero.
pub fn spd_log(p: &SpdMatrix) -> Result<Array2<f64>> {
    let eig = sym_eig(p.as_array())?;
    eig.require_conditioning()?;
    Ok(eig.recompose(f64::ln))
}

/// Matrix exponential of a symmetric matrix. The result is always SPD.
pub fn sym_exp(a: &Array2<f64>) -> Result<SpdMatrix> {
    let eig = sym_eig(a)?;
    Ok(SpdMatrix::trusted(eig.recompose(f64::exp)))
}

/// Geodesic (affine-invariant) distance between two SPD matrices.
///
/// Computed as the root sum of squared log eigenvalues of the whitened form
/// `P1^{-1/2} P2 P1^{-1/2}`, which has the same spectrum as `P1^{-1} P2` but
/// stays symmetric, keeping the eigenvalues real in floating point. The
/// distance is symmetric in its arguments and invariant under congruence
/// transforms `P -> C^T P C` for any invertible `C`.
pub fn riemannian_distance(p1: &SpdMatrix, p2: &SpdMatrix) -> Result<f64> {
    if p1.dim() != p2.dim() {
        return Err(Error::DimensionMismatch {
            context: "riemannian_distance",
            expected: format!("{0}x{0}", p1.dim()),
            got: format!("{0}x{0}", p2.dim()),
        });
    }
    let whitener = spd_power(p1, -0.5)?;
    let inner = whitener
        .as_array()
        .dot(p2.as_array())
        .dot(whitener.as_array());
    let eig = sym_eig(&symmetrize(&inner))?;
    eig.require_conditioning()?;
    let sum: f64 = eig.eigenvalues.iter().map(|v| v.ln().powi(2)).sum();
    Ok(sum.sqrt())
}

/// Entrywise arithmetic mean of a nonempty set of SPD matrices.
///
/// The result is SPD by convexity of the SPD cone and is revalidated on
/// construction.
pub fn arithmetic_mean(mats: &[SpdMatrix]) -> Result<SpdMatrix> {
    let first = mats.first().ok_or(Error::EmptyInput {
        context: "arithmetic_mean",
    })?;
    let dim = first.dim();
    let mut acc = Array2::<f64>::zeros((dim, dim));
    for m in mats {
        if m.dim() != dim {
            return Err(Error::DimensionMismatch {
                context: "arithmetic_mean",
                expected: format!("{dim}x{dim}"),
                got: format!("{0}x{0}", m.dim()),
            });
        }
        acc += m.as_array();
    }
    acc /= mats.len() as f64;
    SpdMatrix::new(acc)
}

/// Frechet mean under the affine-invariant metric.
///
/// Runs the standard fixed point iteration: starting from the arithmetic
/// mean, map all matrices to the tangent space at the current estimate,
/// average there, and map the average back through the exponential:
///
/// `M <- M^{1/2} exp( (1/N) sum_i log(M^{-1/2} P_i M^{-1/2}) ) M^{1/2}`
///
/// Iteration stops once the Frobenius norm of the averaged tangent term
/// falls below `tol` or after `max_iter` iterations, whichever comes first;
/// the returned [`RiemannianMean`] reports which happened.
pub fn riemannian_mean(mats: &[SpdMatrix], tol: f64, max_iter: usize) -> Result<RiemannianMean> {
    if mats.is_empty() {
        return Err(Error::EmptyInput {
            context: "riemannian_mean",
        });
    }
    if tol <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: format!("must be positive, got {tol}"),
        });
    }
    if max_iter == 0 {
        return Err(Error::InvalidParameter {
            name: "max_iter",
            reason: "must be at least 1".into(),
        });
    }
    let mut mean = arithmetic_mean(mats)?;
    let count = mats.len() as f64;
    let mut delta = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let eig = sym_eig(mean.as_array())?;
        eig.require_conditioning()?;
        let root = eig.recompose(f64::sqrt);
        let inv_root = eig.recompose(|v| v.powf(-0.5));
        let mut tangent = Array2::<f64>::zeros((mean.dim(), mean.dim()));
        for m in mats {
            let whitened = symmetrize(&inv_root.dot(m.as_array()).dot(&inv_root));
            tangent += &spd_log(&SpdMatrix::trusted(whitened))?;
        }
        tangent /= count;
        delta = frobenius(&tangent);
        let step = sym_exp(&tangent)?;
        mean = SpdMatrix::trusted(symmetrize(&root.dot(step.as_array()).dot(&root)));
        if delta < tol {
            converged = true;
            break;
        }
    }
    Ok(RiemannianMean {
        mean,
        iterations,
        delta,
        converged,
    })
}
