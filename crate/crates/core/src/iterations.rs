//! The three iterative processes: mini-batch SGM on a sample, batch gradient
//! descent on the same sample, and the population iteration on a surrogate
//! measure.
//!
//! Iteration counters follow the algorithm: `ω₁ = 0` and iteration
//! `t = 1, …, T` produces `ω_{t+1}`. A checkpoint `t` records the iterate
//! after `t` updates (`ω_{t+1}`), so checkpoint `0` is the zero start and the
//! pass count at checkpoint `t` is `⌈b t / m⌉`.
//!
//! Random indices come from `ChaCha8Rng` seeded with `seed_from_u64`, drawn
//! i.i.d. uniformly on the sample (with replacement, also within a batch).
//! Independent trials use `mix_seed(base_seed, r)`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::kernels::KernelSpec;
use crate::numeric::dot;
use crate::schedules::{passes, StepSchedule};
use crate::spaces::{AnchorSet, Backend, HypothesisVector, Points, SpaceError};

/// Name of the index generator, echoed into run configurations.
pub const PRNG_ALGORITHM: &str =
    "ChaCha8Rng (rand_chacha 0.9, seed_from_u64) with rand 0.9 random_range; trial seeds by splitmix64";

/// Coefficients above this magnitude count as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IterationError {
    #[error("mini-batch size {b} out of range [1, {m}]")]
    BatchOutOfRange { b: usize, m: usize },
    #[error("iteration count must be at least 1")]
    ZeroIterations,
    #[error("sample must be nonempty")]
    EmptySample,
    #[error("index plan was drawn for m = {plan} but the sample has {sample} points")]
    PlanMismatch { plan: usize, sample: usize },
    #[error("index plan covers {available} iterations, {requested} requested")]
    PlanTooShort { available: usize, requested: usize },
    #[error("checkpoints must be strictly increasing (found {previous} then {next})")]
    CheckpointOrder { previous: usize, next: usize },
    #[error("checkpoint {checkpoint} is beyond the last iteration {iterations}")]
    CheckpointBeyondHorizon { checkpoint: usize, iterations: usize },
    #[error("iterate diverged at iteration {iteration}: coefficient {index} = {value}")]
    Divergence {
        iteration: usize,
        index: usize,
        value: f64,
    },
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// SplitMix64 finalizer applied to `base_seed + (trial + 1)·φ`, where `φ` is
/// the 64-bit golden-ratio constant.
pub fn mix_seed(base_seed: u64, trial: u64) -> u64 {
    let mut z = base_seed.wrapping_add(trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Which learning sequence to run on a sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Algorithm {
    /// Mini-batch SGM with batch size `batch`.
    Sgm { batch: usize },
    /// Full-gradient descent on the empirical risk.
    Batch,
}

impl Algorithm {
    /// Batch size used for pass counting (`m` for batch GM).
    pub fn batch_size(&self, m: usize) -> usize {
        match self {
            Algorithm::Sgm { batch } => *batch,
            Algorithm::Batch => m,
        }
    }
}

/// Table of `T × b` sample indices drawn i.i.d. uniformly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexPlan {
    m: usize,
    b: usize,
    iterations: usize,
    seed: u64,
    indices: Vec<u32>,
}

impl IndexPlan {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn batch_size(&self) -> usize {
        self.b
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Zero-based sample positions used at iteration `t` (`1 ≤ t ≤ T`).
    pub fn batch(&self, t: usize) -> &[u32] {
        &self.indices[(t - 1) * self.b..t * self.b]
    }

    /// Flat table, row `t - 1` holding the batch of iteration `t`.
    pub fn indices(&self) -> &[u32] {
        &self.indices
    }
}

pub fn sample_index_plan(
    m: usize,
    b: usize,
    iterations: usize,
    seed: u64,
) -> Result<IndexPlan, IterationError> {
    if b < 1 || b > m {
        return Err(IterationError::BatchOutOfRange { b, m });
    }
    if iterations < 1 {
        return Err(IterationError::ZeroIterations);
    }
    assert!(m <= u32::MAX as usize, "sample too large for u32 indices");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices = (0..iterations * b)
        .map(|_| rng.random_range(0..m as u32))
        .collect();
    Ok(IndexPlan {
        m,
        b,
        iterations,
        seed,
        indices,
    })
}

/// Sorted, strictly increasing checkpoint iterations in `[0, T]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoints(Vec<usize>);

impl Checkpoints {
    pub fn new(ts: Vec<usize>, iterations: usize) -> Result<Self, IterationError> {
        for w in ts.windows(2) {
            if w[1] <= w[0] {
                return Err(IterationError::CheckpointOrder {
                    previous: w[0],
                    next: w[1],
                });
            }
        }
        if let Some(&last) = ts.last() {
            if last > iterations {
                return Err(IterationError::CheckpointBeyondHorizon {
                    checkpoint: last,
                    iterations,
                });
            }
        }
        Ok(Checkpoints(ts))
    }

    /// Only the final iterate.
    pub fn last(iterations: usize) -> Self {
        Checkpoints(vec![iterations])
    }

    /// Every iteration `1..=T`.
    pub fn all(iterations: usize) -> Self {
        Checkpoints((1..=iterations).collect())
    }

    /// `stride, 2·stride, …`, always ending at `T`.
    pub fn every(stride: usize, iterations: usize) -> Self {
        let stride = stride.max(1);
        let mut ts: Vec<usize> = (1..=iterations / stride).map(|k| k * stride).collect();
        if ts.last() != Some(&iterations) && iterations > 0 {
            ts.push(iterations);
        }
        Checkpoints(ts)
    }

    /// The first iteration completing each pass over `m` points with batch
    /// size `b`, up to `T`.
    pub fn at_passes(m: usize, b: usize, iterations: usize) -> Self {
        let mut ts = Vec::new();
        let mut pass = 1;
        loop {
            let t = (pass * m).div_ceil(b);
            if t > iterations {
                break;
            }
            if ts.last() != Some(&t) {
                ts.push(t);
            }
            pass += 1;
        }
        if ts.last() != Some(&iterations) && iterations > 0 {
            ts.push(iterations);
        }
        Checkpoints(ts)
    }

    /// About `count` distinct log-spaced iterations in `[1, T]`, including `T`.
    pub fn log_spaced(iterations: usize, count: usize) -> Self {
        let mut ts: Vec<usize> = Vec::new();
        let count = count.max(1);
        for k in 0..count {
            let frac = if count == 1 { 1.0 } else { k as f64 / (count - 1) as f64 };
            let t = (iterations as f64).powf(frac).round() as usize;
            let t = t.clamp(1, iterations.max(1));
            if ts.last().is_none_or(|&l| t > l) {
                ts.push(t);
            }
        }
        Checkpoints(ts)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> Option<usize> {
        self.0.last().copied()
    }
}

/// Where a training sample lives: explicit coordinates or kernel anchors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "backend")]
pub enum SpaceSpec {
    Euclidean,
    Kernel { kernel: KernelSpec },
}

#[derive(Clone, Debug)]
enum Design {
    Euclidean(Points),
    Kernel(Arc<AnchorSet>),
}

/// Inputs and targets prepared for one of the backends.
#[derive(Clone, Debug)]
pub struct TrainingSet {
    design: Design,
    targets: Vec<f64>,
}

impl TrainingSet {
    pub fn new(points: Points, targets: Vec<f64>, space: SpaceSpec) -> Result<Self, IterationError> {
        Self::with_execution(points, targets, space, Execution::default())
    }

    pub fn with_execution(
        points: Points,
        targets: Vec<f64>,
        space: SpaceSpec,
        exec: Execution,
    ) -> Result<Self, IterationError> {
        if points.is_empty() {
            return Err(IterationError::EmptySample);
        }
        if points.len() != targets.len() {
            return Err(SpaceError::LengthMismatch {
                points: points.len(),
                targets: targets.len(),
            }
            .into());
        }
        if let Some(i) = targets.iter().position(|y| !y.is_finite()) {
            return Err(SpaceError::NonFinite(i).into());
        }
        let design = match space {
            SpaceSpec::Euclidean => Design::Euclidean(points),
            SpaceSpec::Kernel { kernel } => {
                Design::Kernel(AnchorSet::with_execution(kernel, points, exec)?)
            }
        };
        Ok(TrainingSet { design, targets })
    }

    /// Kernel training set over an existing anchor set.
    pub fn from_anchors(anchors: Arc<AnchorSet>, targets: Vec<f64>) -> Result<Self, IterationError> {
        if anchors.len() != targets.len() {
            return Err(SpaceError::LengthMismatch {
                points: anchors.len(),
                targets: targets.len(),
            }
            .into());
        }
        Ok(TrainingSet {
            design: Design::Kernel(anchors),
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn points(&self) -> &Points {
        match &self.design {
            Design::Euclidean(p) => p,
            Design::Kernel(a) => a.points(),
        }
    }

    pub fn anchors(&self) -> Option<&Arc<AnchorSet>> {
        match &self.design {
            Design::Kernel(a) => Some(a),
            Design::Euclidean(_) => None,
        }
    }

    /// `κ²` for this design: kernel constant, or max squared norm.
    pub fn kappa_sq(&self) -> f64 {
        match &self.design {
            Design::Kernel(a) => a.kernel().kappa_sq(a.points()),
            Design::Euclidean(p) => KernelSpec::Linear.kappa_sq(p),
        }
    }

    /// Number of coefficients of an iterate.
    pub fn coefficient_len(&self) -> usize {
        match &self.design {
            Design::Euclidean(p) => p.dim(),
            Design::Kernel(a) => a.len(),
        }
    }

    pub fn backend(&self) -> Backend {
        match &self.design {
            Design::Euclidean(_) => Backend::Euclidean,
            Design::Kernel(a) => Backend::Kernel(Arc::clone(a)),
        }
    }

    pub fn zero(&self) -> HypothesisVector {
        HypothesisVector::from_parts(self.backend(), vec![0.0; self.coefficient_len()])
    }

    /// `⟨h, x_i⟩` for the sample point `i`, given coefficient vector `coefs`.
    #[inline]
    fn value_at(&self, coefs: &[f64], i: usize) -> f64 {
        match &self.design {
            Design::Euclidean(p) => dot(p.row(i), coefs),
            Design::Kernel(a) => dot(a.gram().row(i), coefs),
        }
    }

    /// Values at every sample point.
    fn values(&self, coefs: &[f64], exec: Execution) -> Vec<f64> {
        match &self.design {
            Design::Euclidean(p) => exec.matvec(p.as_slice(), p.dim(), coefs),
            Design::Kernel(a) => a.gram().matvec(coefs, exec),
        }
    }
}

/// Iterates recorded at checkpoints.
#[derive(Clone, Debug)]
pub struct Trajectory {
    checkpoints: Vec<usize>,
    iterates: Vec<HypothesisVector>,
    passes: Vec<usize>,
    batch_size: usize,
    m: usize,
}

impl Trajectory {
    pub fn checkpoints(&self) -> &[usize] {
        &self.checkpoints
    }

    pub fn iterates(&self) -> &[HypothesisVector] {
        &self.iterates
    }

    pub fn passes(&self) -> &[usize] {
        &self.passes
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn sample_size(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.checkpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.checkpoints.is_empty()
    }

    pub fn get(&self, t: usize) -> Option<&HypothesisVector> {
        self.checkpoints
            .binary_search(&t)
            .ok()
            .map(|i| &self.iterates[i])
    }

    pub fn last(&self) -> Option<&HypothesisVector> {
        self.iterates.last()
    }

    /// `(checkpoint, passes, iterate)` triples.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &HypothesisVector)> {
        self.checkpoints
            .iter()
            .zip(&self.passes)
            .zip(&self.iterates)
            .map(|((&t, &p), h)| (t, p, h))
    }

    /// Same iterates under new checkpoint labels (for relabeling checks).
    pub fn relabel(&self, labels: Vec<usize>) -> Result<Trajectory, IterationError> {
        assert_eq!(labels.len(), self.len(), "one label per checkpoint");
        let max = labels.last().copied().unwrap_or(0);
        Checkpoints::new(labels.clone(), max)?;
        Ok(Trajectory {
            passes: labels.iter().map(|&t| passes(self.batch_size, t, self.m)).collect(),
            checkpoints: labels,
            iterates: self.iterates.clone(),
            batch_size: self.batch_size,
            m: self.m,
        })
    }
}

struct Recorder<'a> {
    wanted: &'a [usize],
    next: usize,
    backend: Backend,
    traj: Trajectory,
}

impl<'a> Recorder<'a> {
    fn new(wanted: &'a Checkpoints, backend: Backend, batch_size: usize, m: usize) -> Self {
        Recorder {
            wanted: wanted.as_slice(),
            next: 0,
            backend,
            traj: Trajectory {
                checkpoints: Vec::with_capacity(wanted.len()),
                iterates: Vec::with_capacity(wanted.len()),
                passes: Vec::with_capacity(wanted.len()),
                batch_size,
                m,
            },
        }
    }

    #[inline]
    fn offer(&mut self, t: usize, coefs: &[f64]) {
        if self.wanted.get(self.next) == Some(&t) {
            self.traj.checkpoints.push(t);
            self.traj.passes.push(passes(self.traj.batch_size, t, self.traj.m));
            self.traj
                .iterates
                .push(HypothesisVector::from_parts(self.backend.clone(), coefs.to_vec()));
            self.next += 1;
        }
    }

    fn finish(self) -> Trajectory {
        self.traj
    }
}

fn check_checkpoints(checkpoints: &Checkpoints, iterations: usize) -> Result<(), IterationError> {
    if iterations < 1 {
        return Err(IterationError::ZeroIterations);
    }
    match checkpoints.max() {
        Some(last) if last > iterations => Err(IterationError::CheckpointBeyondHorizon {
            checkpoint: last,
            iterations,
        }),
        _ => Ok(()),
    }
}

#[inline]
fn check_coefficient(iteration: usize, index: usize, value: f64) -> Result<(), IterationError> {
    if !value.is_finite() || value.abs() > DIVERGENCE_LIMIT {
        return Err(IterationError::Divergence {
            iteration,
            index,
            value,
        });
    }
    Ok(())
}

/// Mini-batch SGM: `ω_{t+1} = ω_t − (η_t / b) Σ_{i ∈ J_t} (⟨ω_t, x_i⟩ − y_i) x_i`.
///
/// Runs `plan.iterations()` updates. In the kernel backend only the `b`
/// coefficients indexed by the batch change, at `O(m b)` cost per iteration.
pub fn run_sgm(
    train: &TrainingSet,
    schedule: &StepSchedule,
    plan: &IndexPlan,
    checkpoints: &Checkpoints,
) -> Result<Trajectory, IterationError> {
    let m = train.len();
    if plan.m() != m {
        return Err(IterationError::PlanMismatch {
            plan: plan.m(),
            sample: m,
        });
    }
    let iterations = plan.iterations();
    check_checkpoints(checkpoints, iterations)?;
    let b = plan.batch_size();
    let mut coefs = vec![0.0; train.coefficient_len()];
    let mut rec = Recorder::new(checkpoints, train.backend(), b, m);
    rec.offer(0, &coefs);
    let mut residuals = vec![0.0; b];
    let mut grad = match &train.design {
        Design::Euclidean(p) => vec![0.0; p.dim()],
        Design::Kernel(_) => Vec::new(),
    };
    let y = train.targets();
    for t in 1..=iterations {
        let step = schedule.eta(t) / b as f64;
        let batch = plan.batch(t);
        for (r, &j) in residuals.iter_mut().zip(batch) {
            let j = j as usize;
            *r = train.value_at(&coefs, j) - y[j];
        }
        match &train.design {
            Design::Kernel(_) => {
                for (&r, &j) in residuals.iter().zip(batch) {
                    let j = j as usize;
                    coefs[j] -= step * r;
                }
                for &j in batch {
                    check_coefficient(t, j as usize, coefs[j as usize])?;
                }
            }
            Design::Euclidean(points) => {
                grad.iter_mut().for_each(|g| *g = 0.0);
                for (&r, &j) in residuals.iter().zip(batch) {
                    for (g, x) in grad.iter_mut().zip(points.row(j as usize)) {
                        *g += r * x;
                    }
                }
                for (k, (c, g)) in coefs.iter_mut().zip(&grad).enumerate() {
                    *c -= step * g;
                    check_coefficient(t, k, *c)?;
                }
            }
        }
        rec.offer(t, &coefs);
    }
    Ok(rec.finish())
}

/// Batch GM: `ν_{t+1} = ν_t − (η_t / m) Σ_i (⟨ν_t, x_i⟩ − y_i) x_i`.
pub fn run_batch_gm(
    train: &TrainingSet,
    schedule: &StepSchedule,
    iterations: usize,
    checkpoints: &Checkpoints,
) -> Result<Trajectory, IterationError> {
    run_batch_gm_with(train, schedule, iterations, checkpoints, Execution::default())
}

pub fn run_batch_gm_with(
    train: &TrainingSet,
    schedule: &StepSchedule,
    iterations: usize,
    checkpoints: &Checkpoints,
    exec: Execution,
) -> Result<Trajectory, IterationError> {
    check_checkpoints(checkpoints, iterations)?;
    let m = train.len();
    let mut coefs = vec![0.0; train.coefficient_len()];
    let mut rec = Recorder::new(checkpoints, train.backend(), m, m);
    rec.offer(0, &coefs);
    let y = train.targets();
    for t in 1..=iterations {
        let step = schedule.eta(t) / m as f64;
        let mut residuals = train.values(&coefs, exec);
        residuals.iter_mut().zip(y).for_each(|(r, yi)| *r -= yi);
        match &train.design {
            Design::Kernel(_) => {
                for (k, (c, r)) in coefs.iter_mut().zip(&residuals).enumerate() {
                    *c -= step * r;
                    check_coefficient(t, k, *c)?;
                }
            }
            Design::Euclidean(points) => {
                let mut grad = vec![0.0; points.dim()];
                for (i, &r) in residuals.iter().enumerate() {
                    for (g, x) in grad.iter_mut().zip(points.row(i)) {
                        *g += r * x;
                    }
                }
                for (k, (c, g)) in coefs.iter_mut().zip(&grad).enumerate() {
                    *c -= step * g;
                    check_coefficient(t, k, *c)?;
                }
            }
        }
        rec.offer(t, &coefs);
    }
    Ok(rec.finish())
}

/// Surrogate measure `ρ̂ = (1/N) Σ δ_{x̂_i}` together with the regression
/// function's values at its points.
#[derive(Clone, Debug)]
pub struct Surrogate {
    points: Points,
    values: Vec<f64>,
}

impl Surrogate {
    pub fn new(points: Points, values: Vec<f64>) -> Result<Self, IterationError> {
        if points.is_empty() {
            return Err(IterationError::EmptySample);
        }
        if points.len() != values.len() {
            return Err(SpaceError::LengthMismatch {
                points: points.len(),
                targets: values.len(),
            }
            .into());
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SpaceError::NonFinite(i).into());
        }
        Ok(Surrogate { points, values })
    }

    /// Evaluates `f_true` at every point.
    pub fn from_fn<F>(points: Points, f_true: F) -> Result<Self, IterationError>
    where
        F: Fn(&[f64]) -> f64,
    {
        let values = points.rows().map(&f_true).collect();
        Self::new(points, values)
    }

    /// `n` i.i.d. uniform points on `[0, 1]`.
    pub fn uniform_iid<F>(n: usize, seed: u64, f_true: F) -> Result<Self, IterationError>
    where
        F: Fn(&[f64]) -> f64,
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        Self::from_fn(Points::from_scalars(&xs)?, f_true)
    }

    /// Midpoint grid `(i + 1/2) / n` on `[0, 1]`.
    pub fn uniform_grid<F>(n: usize, f_true: F) -> Result<Self, IterationError>
    where
        F: Fn(&[f64]) -> f64,
    {
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        Self::from_fn(Points::from_scalars(&xs)?, f_true)
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Population problem in the given space: the surrogate points with the
    /// regression values as targets.
    pub fn as_training_set(&self, space: SpaceSpec, exec: Execution) -> Result<TrainingSet, IterationError> {
        TrainingSet::with_execution(self.points.clone(), self.values.clone(), space, exec)
    }
}

/// Population iteration on `ρ̂`:
/// `μ_{t+1} = μ_t − (η_t / N) Σ_i (⟨μ_t, x̂_i⟩ − f_ρ(x̂_i)) x̂_i`.
///
/// `population` is [`Surrogate::as_training_set`]; kernel iterates are
/// anchored on the surrogate points.
pub fn run_population(
    population: &TrainingSet,
    schedule: &StepSchedule,
    iterations: usize,
    checkpoints: &Checkpoints,
) -> Result<Trajectory, IterationError> {
    run_batch_gm(population, schedule, iterations, checkpoints)
}

pub fn run_population_with(
    population: &TrainingSet,
    schedule: &StepSchedule,
    iterations: usize,
    checkpoints: &Checkpoints,
    exec: Execution,
) -> Result<Trajectory, IterationError> {
    run_batch_gm_with(population, schedule, iterations, checkpoints, exec)
}

/// Runs `algorithm` for `iterations` steps; `seed` only matters for SGM.
pub fn run_algorithm(
    train: &TrainingSet,
    algorithm: Algorithm,
    schedule: &StepSchedule,
    iterations: usize,
    seed: u64,
    checkpoints: &Checkpoints,
    exec: Execution,
) -> Result<Trajectory, IterationError> {
    match algorithm {
        Algorithm::Sgm { batch } => {
            let plan = sample_index_plan(train.len(), batch, iterations, seed)?;
            run_sgm(train, schedule, &plan, checkpoints)
        }
        Algorithm::Batch => run_batch_gm_with(train, schedule, iterations, checkpoints, exec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedules::make_schedule;

    fn euclid_1d(xs: &[f64], ys: &[f64]) -> TrainingSet {
        TrainingSet::new(Points::from_scalars(xs).unwrap(), ys.to_vec(), SpaceSpec::Euclidean).unwrap()
    }

    fn coef0(traj: &Trajectory, t: usize) -> f64 {
        traj.get(t).unwrap().coefficients()[0]
    }

    #[test]
    fn plan_with_single_point_is_all_zero_index() {
        let plan = sample_index_plan(1, 1, 50, 9).unwrap();
        assert!(plan.indices().iter().all(|&j| j == 0));
    }

    #[test]
    fn plan_is_deterministic() {
        let a = sample_index_plan(10, 2, 5, 42).unwrap();
        let b = sample_index_plan(10, 2, 5, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_index_plan(10, 2, 5, 43).unwrap());
        assert!(a.indices().iter().all(|&j| j < 10));
    }

    #[test]
    fn plan_rejects_bad_batch() {
        assert_eq!(
            sample_index_plan(5, 6, 1, 0),
            Err(IterationError::BatchOutOfRange { b: 6, m: 5 })
        );
        assert_eq!(
            sample_index_plan(5, 0, 1, 0),
            Err(IterationError::BatchOutOfRange { b: 0, m: 5 })
        );
        assert_eq!(
            sample_index_plan(5, 6, 1, 0).unwrap_err().to_string(),
            "mini-batch size 6 out of range [1, 5]"
        );
        assert_eq!(sample_index_plan(5, 1, 0, 0), Err(IterationError::ZeroIterations));
    }

    #[test]
    fn sgm_hand_recurrence() {
        let train = euclid_1d(&[1.0], &[1.0]);
        let s = make_schedule(0.5, 0.0, 1.0).unwrap();
        let plan = sample_index_plan(1, 1, 3, 0).unwrap();
        let traj = run_sgm(&train, &s, &plan, &Checkpoints::all(3)).unwrap();
        assert_eq!(coef0(&traj, 1), 0.5);
        assert_eq!(coef0(&traj, 2), 0.75);
        assert_eq!(coef0(&traj, 3), 0.875);
    }

    #[test]
    fn zero_targets_stay_at_zero() {
        let train = TrainingSet::new(
            Points::from_scalars(&[0.1, 0.5, 0.9]).unwrap(),
            vec![0.0; 3],
            SpaceSpec::Kernel {
                kernel: KernelSpec::gaussian(0.2).unwrap(),
            },
        )
        .unwrap();
        let s = make_schedule(0.5, 0.0, 1.0).unwrap();
        let plan = sample_index_plan(3, 2, 20, 1).unwrap();
        let traj = run_sgm(&train, &s, &plan, &Checkpoints::all(20)).unwrap();
        assert!(traj.iterates().iter().all(HypothesisVector::is_zero));
        let traj = run_batch_gm(&train, &s, 20, &Checkpoints::all(20)).unwrap();
        assert!(traj.iterates().iter().all(HypothesisVector::is_zero));
    }

    #[test]
    fn batch_gm_hand_step() {
        let train = euclid_1d(&[1.0, 1.0], &[0.0, 1.0]);
        let s = make_schedule(1.0, 0.0, 1.0).unwrap();
        let traj = run_batch_gm(&train, &s, 2, &Checkpoints::all(2)).unwrap();
        assert_eq!(coef0(&traj, 1), 0.5);
        assert_eq!(coef0(&traj, 2), 0.5);
    }

    #[test]
    fn population_hand_recurrence() {
        let sur = Surrogate::from_fn(Points::from_scalars(&[1.0]).unwrap(), |_| 2.0).unwrap();
        let pop = sur.as_training_set(SpaceSpec::Euclidean, Execution::default()).unwrap();
        let s = make_schedule(0.5, 0.0, 1.0).unwrap();
        let traj = run_population(&pop, &s, 3, &Checkpoints::all(3)).unwrap();
        assert_eq!(coef0(&traj, 1), 1.0);
        assert_eq!(coef0(&traj, 2), 1.5);
        assert_eq!(coef0(&traj, 3), 1.75);

        let zero = Surrogate::from_fn(Points::from_scalars(&[0.2, 0.4]).unwrap(), |_| 0.0).unwrap();
        let pop = zero
            .as_training_set(
                SpaceSpec::Kernel {
                    kernel: KernelSpec::Sobolev,
                },
                Execution::default(),
            )
            .unwrap();
        let traj = run_population(&pop, &s, 5, &Checkpoints::all(5)).unwrap();
        assert!(traj.iterates().iter().all(HypothesisVector::is_zero));
    }

    #[test]
    fn batch_gm_one_step_matches_mean_gradient() {
        let xs = [0.3, -0.7, 1.1, 0.25];
        let ys = [1.0, 0.5, -2.0, 0.0];
        let train = euclid_1d(&xs, &ys);
        let s = make_schedule(0.3, 0.0, 1.0).unwrap();
        let traj = run_batch_gm(&train, &s, 1, &Checkpoints::last(1)).unwrap();
        // ν₁ = 0 so the gradient is -(1/m) Σ y_i x_i.
        let expected = 0.3 * xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>() / 4.0;
        assert!((coef0(&traj, 1) - expected).abs() < 1e-15);
    }

    #[test]
    fn divergence_is_reported_with_iteration() {
        let train = euclid_1d(&[10.0], &[1.0]);
        // step 1 on ‖x‖² = 100 multiplies the error by -99 each iteration
        let s = make_schedule(1.0, 0.0, 1.0).unwrap();
        let err = run_batch_gm(&train, &s, 100, &Checkpoints::last(100)).unwrap_err();
        match err {
            IterationError::Divergence { iteration, .. } => assert!(iteration > 1 && iteration < 100),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn trajectory_records_passes() {
        let train = euclid_1d(&[1.0; 10], &[1.0; 10]);
        let s = make_schedule(0.1, 0.0, 1.0).unwrap();
        let plan = sample_index_plan(10, 3, 12, 5).unwrap();
        let cps = Checkpoints::new(vec![0, 3, 4, 7, 12], 12).unwrap();
        let traj = run_sgm(&train, &s, &plan, &cps).unwrap();
        assert_eq!(traj.checkpoints(), &[0, 3, 4, 7, 12]);
        assert_eq!(traj.passes(), &[0, 1, 2, 3, 4]);
    }

    #[test]
    fn checkpoint_validation() {
        assert!(matches!(
            Checkpoints::new(vec![1, 1], 5),
            Err(IterationError::CheckpointOrder { .. })
        ));
        assert!(matches!(
            Checkpoints::new(vec![1, 6], 5),
            Err(IterationError::CheckpointBeyondHorizon { .. })
        ));
        assert_eq!(Checkpoints::at_passes(100, 10, 35).as_slice(), &[10, 20, 30, 35]);
        assert_eq!(Checkpoints::at_passes(10, 3, 10).as_slice(), &[4, 7, 10]);
        assert_eq!(Checkpoints::every(4, 10).as_slice(), &[4, 8, 10]);
        let ls = Checkpoints::log_spaced(10_000, 9);
        assert_eq!(ls.as_slice().first(), Some(&1));
        assert_eq!(ls.max(), Some(10_000));
    }

    #[test]
    fn plan_mismatch_rejected() {
        let train = euclid_1d(&[1.0, 2.0], &[1.0, 1.0]);
        let s = make_schedule(0.1, 0.0, 1.0).unwrap();
        let plan = sample_index_plan(3, 1, 4, 0).unwrap();
        assert_eq!(
            run_sgm(&train, &s, &plan, &Checkpoints::last(4)).unwrap_err(),
            IterationError::PlanMismatch { plan: 3, sample: 2 }
        );
    }

    #[test]
    fn mix_seed_spreads_trials() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|r| mix_seed(7, r)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_eq!(mix_seed(7, 3), mix_seed(7, 3));
    }
}
