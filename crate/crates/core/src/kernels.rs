//! Kernels, Gram matrices and the boundedness constant `κ²`.
//!
//! Three kernels are provided:
//!
//! * Gaussian, `K(x, x') = exp(-‖x - x'‖² / (2σ²))`, with `κ² = 1`;
//! * the first-order Sobolev kernel on `[0, 1]`,
//!   `K(x, x') = (1 - max(x, x')) · min(x, x')`, with `κ² = 1/4`;
//! * the linear kernel `⟨x, x'⟩`, which realizes `H = ℝ^d`; its `κ²` is the
//!   largest squared norm of the supplied points.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::spaces::Points;

/// Slack on the `[0, 1]` domain of the Sobolev kernel.
pub const SOBOLEV_DOMAIN_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("gaussian bandwidth must be finite and positive, got {0}")]
    InvalidBandwidth(f64),
    #[error("sobolev kernel input {0} lies outside [0, 1]")]
    OutOfDomain(f64),
    #[error("sobolev kernel takes scalar inputs, got dimension {0}")]
    NotScalar(usize),
    #[error("kernel inputs have different lengths: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("cannot build a Gram matrix from an empty point set")]
    EmptyPoints,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Gaussian { sigma: f64 },
    Sobolev,
    Linear,
}

impl KernelSpec {
    pub fn gaussian(sigma: f64) -> Result<Self, KernelError> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(KernelError::InvalidBandwidth(sigma));
        }
        Ok(KernelSpec::Gaussian { sigma })
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::Gaussian { .. } => "gaussian",
            KernelSpec::Sobolev => "sobolev",
            KernelSpec::Linear => "linear",
        }
    }

    /// Checks that `x` belongs to the kernel's input domain.
    pub fn check_point(&self, x: &[f64]) -> Result<(), KernelError> {
        match self {
            KernelSpec::Gaussian { sigma } if !(sigma.is_finite() && *sigma > 0.0) => {
                Err(KernelError::InvalidBandwidth(*sigma))
            }
            KernelSpec::Sobolev => {
                if x.len() != 1 {
                    return Err(KernelError::NotScalar(x.len()));
                }
                let v = x[0];
                if !(-SOBOLEV_DOMAIN_SLACK..=1.0 + SOBOLEV_DOMAIN_SLACK).contains(&v) {
                    return Err(KernelError::OutOfDomain(v));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
        if x.len() != y.len() {
            return Err(KernelError::DimensionMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(self.eval_unchecked(x, y))
    }

    /// Evaluation without domain checks; callers validate the point sets once.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Gaussian { sigma } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
            KernelSpec::Sobolev => {
                let (lo, hi) = if x[0] <= y[0] { (x[0], y[0]) } else { (y[0], x[0]) };
                (1.0 - hi) * lo
            }
            KernelSpec::Linear => crate::numeric::dot(x, y),
        }
    }

    /// Validates every row of `points` against the kernel domain.
    pub fn check_points(&self, points: &Points) -> Result<(), KernelError> {
        points.rows().try_for_each(|x| self.check_point(x))
    }

    /// Boundedness constant `κ²` with `K(x, x') ≤ κ²` on the domain. Gaussian
    /// and Sobolev use their analytic suprema; the linear kernel uses the
    /// largest squared norm among `points`.
    pub fn kappa_sq(&self, points: &Points) -> f64 {
        match self {
            KernelSpec::Gaussian { .. } => 1.0,
            KernelSpec::Sobolev => 0.25,
            KernelSpec::Linear => points
                .rows()
                .map(|x| crate::numeric::dot(x, x))
                .fold(0.0, f64::max),
        }
    }
}

/// Dense symmetric matrix of kernel evaluations.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    n: usize,
    data: Vec<f64>,
    spec: KernelSpec,
}

impl GramMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spec(&self) -> KernelSpec {
        self.spec
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn max_diagonal(&self) -> f64 {
        self.diagonal().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn matvec(&self, v: &[f64], exec: Execution) -> Vec<f64> {
        exec.matvec(&self.data, self.n, v)
    }

    /// Quadratic form `aᵀ K b`.
    pub fn bilinear(&self, a: &[f64], b: &[f64], exec: Execution) -> f64 {
        crate::numeric::dot(a, &self.matvec(b, exec))
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = nalgebra::DMatrix::from_row_slice(self.n, self.n, &self.data);
        let mut eig: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        eig
    }
}

pub fn build_gram(spec: KernelSpec, points: &Points) -> Result<GramMatrix, KernelError> {
    build_gram_with(spec, points, Execution::default())
}

/// Builds the Gram matrix and symmetrizes it by averaging with its transpose.
pub fn build_gram_with(
    spec: KernelSpec,
    points: &Points,
    exec: Execution,
) -> Result<GramMatrix, KernelError> {
    if points.is_empty() {
        return Err(KernelError::EmptyPoints);
    }
    spec.check_points(points)?;
    let n = points.len();
    let mut data = vec![0.0; n * n];
    exec.fill_rows(&mut data, n, |i, row| {
        let xi = points.row(i);
        for (j, out) in row.iter_mut().enumerate() {
            *out = spec.eval_unchecked(xi, points.row(j));
        }
    });
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (data[i * n + j] + data[j * n + i]);
            data[i * n + j] = avg;
            data[j * n + i] = avg;
        }
    }
    Ok(GramMatrix { n, data, spec })
}

/// Rectangular kernel matrix `K(rows_i, cols_j)`, row-major.
pub fn cross_kernel(
    spec: KernelSpec,
    rows: &Points,
    cols: &Points,
    exec: Execution,
) -> Result<Vec<f64>, KernelError> {
    if rows.dim() != cols.dim() {
        return Err(KernelError::DimensionMismatch {
            left: rows.dim(),
            right: cols.dim(),
        });
    }
    spec.check_points(rows)?;
    spec.check_points(cols)?;
    let width = cols.len();
    let mut data = vec![0.0; rows.len() * width];
    exec.fill_rows(&mut data, width, |i, row| {
        let xi = rows.row(i);
        for (j, out) in row.iter_mut().enumerate() {
            *out = spec.eval_unchecked(xi, cols.row(j));
        }
    });
    Ok(data)
}
