//! The hypothesis space `H` over two interchangeable backends.
//!
//! * **Euclidean**: `H = ℝ^d`, an element is its coordinate vector and the
//!   inner product is the dot product.
//! * **Kernel**: an element is `Σ_j α_j K(x_j, ·)` for the points `x_j` of an
//!   [`AnchorSet`]; `⟨h, g⟩_H = αᵀ K β` and `h(x) = Σ_j α_j K(x_j, x)`.
//!
//! Iterates built from a training sample are anchored on the sample points;
//! population iterates are anchored on the surrogate points. Comparing the two
//! is done through their values on a common point set ([`PointEvaluator`]),
//! never by subtracting coefficient vectors with different anchors.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::kernels::{build_gram_with, cross_kernel, GramMatrix, KernelError, KernelSpec};
use crate::numeric::{compensated_sum, dot};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpaceError {
    #[error("dimension mismatch: expected length {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("hypotheses live in different backends ({left} vs {right})")]
    BackendMismatch {
        left: &'static str,
        right: &'static str,
    },
    #[error("hypotheses are anchored on different point sets (#{left} vs #{right})")]
    AnchorMismatch { left: u64, right: u64 },
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("point dimension must be at least 1")]
    ZeroDimension,
    #[error("flat point buffer of length {len} is not a multiple of dimension {dim}")]
    Ragged { len: usize, dim: usize },
    #[error("{points} points but {targets} targets")]
    LengthMismatch { points: usize, targets: usize },
    #[error("empty input")]
    Empty,
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Row-major collection of input points of a common dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Points {
    dim: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self, SpaceError> {
        if dim == 0 {
            return Err(SpaceError::ZeroDimension);
        }
        if !data.len().is_multiple_of(dim) {
            return Err(SpaceError::Ragged {
                len: data.len(),
                dim,
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(SpaceError::NonFinite(i));
        }
        Ok(Points { dim, data })
    }

    pub fn from_scalars(values: &[f64]) -> Result<Self, SpaceError> {
        Points::new(1, values.to_vec())
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, SpaceError> {
        let dim = rows.first().map(Vec::len).ok_or(SpaceError::Empty)?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(SpaceError::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Points::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// New point set made of the rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Points {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Points {
            dim: self.dim,
            data,
        }
    }
}

static NEXT_ANCHOR_ID: AtomicU64 = AtomicU64::new(1);

/// Anchor points of a kernel expansion, together with their Gram matrix.
#[derive(Debug)]
pub struct AnchorSet {
    id: u64,
    kernel: KernelSpec,
    points: Points,
    gram: GramMatrix,
}

impl AnchorSet {
    pub fn new(kernel: KernelSpec, points: Points) -> Result<Arc<Self>, SpaceError> {
        Self::with_execution(kernel, points, Execution::default())
    }

    pub fn with_execution(
        kernel: KernelSpec,
        points: Points,
        exec: Execution,
    ) -> Result<Arc<Self>, SpaceError> {
        let gram = build_gram_with(kernel, &points, exec)?;
        Ok(Arc::new(AnchorSet {
            id: NEXT_ANCHOR_ID.fetch_add(1, Ordering::Relaxed),
            kernel,
            points,
            gram,
        }))
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Debug)]
pub enum Backend {
    Euclidean,
    Kernel(Arc<AnchorSet>),
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Euclidean => "euclidean",
            Backend::Kernel(_) => "kernel",
        }
    }
}

/// An element of `H`.
#[derive(Clone, Debug)]
pub struct HypothesisVector {
    backend: Backend,
    coefs: Vec<f64>,
}

impl HypothesisVector {
    pub fn euclidean(coords: Vec<f64>) -> Result<Self, SpaceError> {
        check_finite(&coords)?;
        Ok(HypothesisVector {
            backend: Backend::Euclidean,
            coefs: coords,
        })
    }

    pub fn kernel(anchors: Arc<AnchorSet>, coefs: Vec<f64>) -> Result<Self, SpaceError> {
        if coefs.len() != anchors.len() {
            return Err(SpaceError::DimensionMismatch {
                expected: anchors.len(),
                found: coefs.len(),
            });
        }
        check_finite(&coefs)?;
        Ok(HypothesisVector {
            backend: Backend::Kernel(anchors),
            coefs,
        })
    }

    pub fn zero_euclidean(dim: usize) -> Self {
        HypothesisVector {
            backend: Backend::Euclidean,
            coefs: vec![0.0; dim],
        }
    }

    pub fn zero_kernel(anchors: Arc<AnchorSet>) -> Self {
        let n = anchors.len();
        HypothesisVector {
            backend: Backend::Kernel(anchors),
            coefs: vec![0.0; n],
        }
    }

    /// Used by the iteration loops, which check finiteness themselves.
    pub(crate) fn from_parts(backend: Backend, coefs: Vec<f64>) -> Self {
        HypothesisVector { backend, coefs }
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn anchors(&self) -> Option<&Arc<AnchorSet>> {
        match &self.backend {
            Backend::Kernel(a) => Some(a),
            Backend::Euclidean => None,
        }
    }

    /// Coordinates (euclidean) or expansion coefficients (kernel).
    pub fn coefficients(&self) -> &[f64] {
        &self.coefs
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coefs
    }

    pub fn is_zero(&self) -> bool {
        self.coefs.iter().all(|&c| c == 0.0)
    }

    /// `⟨h, x⟩_H`, i.e. the value of `h` at input `x`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64, SpaceError> {
        match &self.backend {
            Backend::Euclidean => {
                if x.len() != self.coefs.len() {
                    return Err(SpaceError::DimensionMismatch {
                        expected: self.coefs.len(),
                        found: x.len(),
                    });
                }
                Ok(dot(&self.coefs, x))
            }
            Backend::Kernel(anchors) => {
                let dim = anchors.points().dim();
                if x.len() != dim {
                    return Err(SpaceError::DimensionMismatch {
                        expected: dim,
                        found: x.len(),
                    });
                }
                let k = anchors.kernel();
                k.check_point(x)?;
                Ok(anchors
                    .points()
                    .rows()
                    .zip(&self.coefs)
                    .map(|(xj, a)| a * k.eval_unchecked(xj, x))
                    .sum())
            }
        }
    }

    pub fn evaluate_points(&self, points: &Points) -> Result<Vec<f64>, SpaceError> {
        PointEvaluator::new(self, points, Execution::default())?.values(self)
    }

    pub fn inner(&self, other: &HypothesisVector) -> Result<f64, SpaceError> {
        self.check_compatible(other)?;
        Ok(match &self.backend {
            Backend::Euclidean => dot(&self.coefs, &other.coefs),
            Backend::Kernel(a) => a.gram().bilinear(&self.coefs, &other.coefs, Execution::default()),
        })
    }

    pub fn norm_sq(&self) -> f64 {
        match &self.backend {
            Backend::Euclidean => dot(&self.coefs, &self.coefs),
            Backend::Kernel(a) => a.gram().bilinear(&self.coefs, &self.coefs, Execution::default()),
        }
    }

    /// `a·self + b·other` in the shared backend.
    pub fn combine(&self, a: f64, other: &HypothesisVector, b: f64) -> Result<Self, SpaceError> {
        self.check_compatible(other)?;
        let coefs: Vec<f64> = self
            .coefs
            .iter()
            .zip(&other.coefs)
            .map(|(x, y)| a * x + b * y)
            .collect();
        check_finite(&coefs)?;
        Ok(HypothesisVector {
            backend: self.backend.clone(),
            coefs,
        })
    }

    /// Empirical squared error `(1/n) Σ (h(x_i) - y_i)²`.
    pub fn mean_square_error(&self, points: &Points, targets: &[f64]) -> Result<f64, SpaceError> {
        if points.len() != targets.len() {
            return Err(SpaceError::LengthMismatch {
                points: points.len(),
                targets: targets.len(),
            });
        }
        if points.is_empty() {
            return Err(SpaceError::Empty);
        }
        let values = self.evaluate_points(points)?;
        Ok(compensated_sum(
            values.iter().zip(targets).map(|(v, y)| (v - y) * (v - y)),
        ) / targets.len() as f64)
    }

    pub(crate) fn check_compatible(&self, other: &HypothesisVector) -> Result<(), SpaceError> {
        match (&self.backend, &other.backend) {
            (Backend::Euclidean, Backend::Euclidean) => {
                if self.coefs.len() != other.coefs.len() {
                    return Err(SpaceError::DimensionMismatch {
                        expected: self.coefs.len(),
                        found: other.coefs.len(),
                    });
                }
                Ok(())
            }
            (Backend::Kernel(a), Backend::Kernel(b)) => {
                if a.id() != b.id() {
                    return Err(SpaceError::AnchorMismatch {
                        left: a.id(),
                        right: b.id(),
                    });
                }
                Ok(())
            }
            (l, r) => Err(SpaceError::BackendMismatch {
                left: l.name(),
                right: r.name(),
            }),
        }
    }
}

fn check_finite(values: &[f64]) -> Result<(), SpaceError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(SpaceError::NonFinite(i)),
        None => Ok(()),
    }
}

/// Evaluates hypotheses of one backend (and one anchor set) on a fixed point
/// set. For the kernel backend the cross-kernel matrix is computed once, so
/// repeated evaluations cost one mat-vec each.
#[derive(Debug)]
pub struct PointEvaluator {
    targets: usize,
    kind: EvalKind,
    exec: Execution,
}

#[derive(Debug)]
enum EvalKind {
    Euclidean(Points),
    Gram(Arc<AnchorSet>),
    Cross { anchor_id: u64, cols: usize, matrix: Vec<f64> },
}

impl PointEvaluator {
    /// Evaluator for hypotheses sharing `like`'s backend, on `points`.
    pub fn new(like: &HypothesisVector, points: &Points, exec: Execution) -> Result<Self, SpaceError> {
        match like.backend() {
            Backend::Euclidean => Self::euclidean(points, like.coefs.len(), exec),
            Backend::Kernel(anchors) => Self::kernel(anchors, points, exec),
        }
    }

    pub fn euclidean(points: &Points, dim: usize, exec: Execution) -> Result<Self, SpaceError> {
        if points.dim() != dim {
            return Err(SpaceError::DimensionMismatch {
                expected: dim,
                found: points.dim(),
            });
        }
        Ok(PointEvaluator {
            targets: points.len(),
            kind: EvalKind::Euclidean(points.clone()),
            exec,
        })
    }

    pub fn kernel(anchors: &Arc<AnchorSet>, points: &Points, exec: Execution) -> Result<Self, SpaceError> {
        if anchors.points() == points {
            return Ok(PointEvaluator {
                targets: points.len(),
                kind: EvalKind::Gram(Arc::clone(anchors)),
                exec,
            });
        }
        if points.dim() != anchors.points().dim() {
            return Err(SpaceError::DimensionMismatch {
                expected: anchors.points().dim(),
                found: points.dim(),
            });
        }
        let matrix = cross_kernel(anchors.kernel(), points, anchors.points(), exec)?;
        Ok(PointEvaluator {
            targets: points.len(),
            kind: EvalKind::Cross {
                anchor_id: anchors.id(),
                cols: anchors.len(),
                matrix,
            },
            exec,
        })
    }

    pub fn len(&self) -> usize {
        self.targets
    }

    pub fn is_empty(&self) -> bool {
        self.targets == 0
    }

    /// Values `h(x_i)` for every target point.
    pub fn values(&self, h: &HypothesisVector) -> Result<Vec<f64>, SpaceError> {
        self.values_of_coefficients(h.backend(), &h.coefs)
    }

    pub(crate) fn values_of_coefficients(
        &self,
        backend: &Backend,
        coefs: &[f64],
    ) -> Result<Vec<f64>, SpaceError> {
        match (&self.kind, backend) {
            (EvalKind::Euclidean(points), Backend::Euclidean) => {
                if coefs.len() != points.dim() {
                    return Err(SpaceError::DimensionMismatch {
                        expected: points.dim(),
                        found: coefs.len(),
                    });
                }
                Ok(self.exec.matvec(points.as_slice(), points.dim(), coefs))
            }
            (EvalKind::Gram(anchors), Backend::Kernel(b)) => {
                if anchors.id() != b.id() {
                    return Err(SpaceError::AnchorMismatch {
                        left: anchors.id(),
                        right: b.id(),
                    });
                }
                Ok(anchors.gram().matvec(coefs, self.exec))
            }
            (EvalKind::Cross { anchor_id, cols, matrix }, Backend::Kernel(b)) => {
                if *anchor_id != b.id() {
                    return Err(SpaceError::AnchorMismatch {
                        left: *anchor_id,
                        right: b.id(),
                    });
                }
                Ok(self.exec.matvec(matrix, *cols, coefs))
            }
            (kind, backend) => Err(SpaceError::BackendMismatch {
                left: match kind {
                    EvalKind::Euclidean(_) => "euclidean",
                    _ => "kernel",
                },
                right: backend.name(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn anchors(kernel: KernelSpec, xs: &[f64]) -> Arc<AnchorSet> {
        AnchorSet::new(kernel, Points::from_scalars(xs).unwrap()).unwrap()
    }

    #[test]
    fn zero_element_evaluates_to_zero() {
        let a = anchors(KernelSpec::gaussian(0.2).unwrap(), &[0.1, 0.7]);
        let h = HypothesisVector::zero_kernel(a);
        assert_eq!(h.evaluate(&[0.3]).unwrap(), 0.0);
        assert!(h.is_zero());
        let e = HypothesisVector::zero_euclidean(3);
        assert_eq!(e.evaluate(&[1.0, -2.0, 5.0]).unwrap(), 0.0);
    }

    #[test]
    fn evaluate_examples() {
        let a = anchors(KernelSpec::gaussian(0.2).unwrap(), &[0.0]);
        let h = HypothesisVector::kernel(a, vec![1.0]).unwrap();
        assert!((h.evaluate(&[0.2]).unwrap() - 0.606531).abs() < 1e-6);

        let e = HypothesisVector::euclidean(vec![1.0, 2.0]).unwrap();
        assert_eq!(e.evaluate(&[3.0, 4.0]).unwrap(), 11.0);
        assert_eq!(
            e.evaluate(&[3.0]),
            Err(SpaceError::DimensionMismatch {
                expected: 2,
                found: 1
            })
        );
    }

    #[test]
    fn inner_examples() {
        let e1 = HypothesisVector::euclidean(vec![1.0, 2.0]).unwrap();
        let e2 = HypothesisVector::euclidean(vec![3.0, 4.0]).unwrap();
        assert_eq!(e1.inner(&e2).unwrap(), 11.0);
        assert_eq!(e1.inner(&HypothesisVector::zero_euclidean(2)).unwrap(), 0.0);

        let a = anchors(KernelSpec::Sobolev, &[0.5]);
        let h = HypothesisVector::kernel(a, vec![1.0]).unwrap();
        assert!((h.inner(&h).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn mismatched_backends_and_anchors_rejected() {
        let a = anchors(KernelSpec::Sobolev, &[0.5]);
        let b = anchors(KernelSpec::Sobolev, &[0.5]);
        let ha = HypothesisVector::kernel(a, vec![1.0]).unwrap();
        let hb = HypothesisVector::kernel(b, vec![1.0]).unwrap();
        assert!(matches!(ha.inner(&hb), Err(SpaceError::AnchorMismatch { .. })));
        let e = HypothesisVector::euclidean(vec![1.0]).unwrap();
        assert!(matches!(ha.inner(&e), Err(SpaceError::BackendMismatch { .. })));
    }

    #[test]
    fn kernel_coefficient_length_checked() {
        let a = anchors(KernelSpec::Sobolev, &[0.5, 0.2]);
        assert!(matches!(
            HypothesisVector::kernel(a, vec![1.0]),
            Err(SpaceError::DimensionMismatch { expected: 2, found: 1 })
        ));
        assert!(matches!(
            HypothesisVector::euclidean(vec![f64::NAN]),
            Err(SpaceError::NonFinite(0))
        ));
    }

    #[test]
    fn mean_square_error_examples() {
        let zero = HypothesisVector::zero_euclidean(1);
        let pts = Points::from_scalars(&[0.3, 0.9]).unwrap();
        assert_eq!(zero.mean_square_error(&pts, &[1.0, -1.0]).unwrap(), 1.0);

        let pts = Points::from_scalars(&[0.0, 0.25, 0.5]).unwrap();
        let mse = zero.mean_square_error(&pts, &[0.0, -0.25, 0.0]).unwrap();
        assert!((mse - 0.0625 / 3.0).abs() < 1e-15);

        let h = HypothesisVector::euclidean(vec![2.0]).unwrap();
        let pts = Points::from_scalars(&[1.0, 3.0]).unwrap();
        assert_eq!(h.mean_square_error(&pts, &[2.0, 6.0]).unwrap(), 0.0);

        let empty = Points::new(1, vec![]).unwrap();
        assert_eq!(zero.mean_square_error(&empty, &[]), Err(SpaceError::Empty));
        assert!(matches!(
            zero.mean_square_error(&pts, &[1.0]),
            Err(SpaceError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn evaluator_on_anchor_points_uses_gram() {
        let a = anchors(KernelSpec::gaussian(0.3).unwrap(), &[0.1, 0.4, 0.8]);
        let h = HypothesisVector::kernel(Arc::clone(&a), vec![0.5, -1.0, 2.0]).unwrap();
        let direct: Vec<f64> = a.points().rows().map(|x| h.evaluate(x).unwrap()).collect();
        let via = h.evaluate_points(a.points()).unwrap();
        for (d, v) in direct.iter().zip(&via) {
            assert!((d - v).abs() < 1e-12);
        }
    }
}
