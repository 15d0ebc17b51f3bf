//! Bias / sample variance / computational variance estimates, excess risk,
//! `H`-norm error, effective dimension and rate fitting.
//!
//! All `L²` quantities are measured on a surrogate measure `ρ̂` (a finite
//! point set) and against the regression function, which stands in for its
//! projection onto the closure of `H`. Cross-backend differences such as
//! `Sω_t − Sμ_t` go through point evaluation on the surrogate, never through
//! coefficient arithmetic.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Sample;
use crate::exec::Execution;
use crate::iterations::{
    mix_seed, run_batch_gm_with, run_population_with, run_sgm, sample_index_plan, Algorithm,
    Checkpoints, IterationError, SpaceSpec, Surrogate, TrainingSet, Trajectory,
};
use crate::numeric::{compensated_sum, mean_and_se, mean_sq_diff};
use crate::schedules::StepSchedule;
use crate::spaces::{HypothesisVector, PointEvaluator, Points, SpaceError};

/// Width of the Monte Carlo band on the decomposition inequality.
pub const DECOMPOSITION_SE_BAND: f64 = 5.0;
/// Width of the Monte Carlo band on the unbiasedness check.
pub const UNBIASEDNESS_SE_BAND: f64 = 4.0;

#[derive(Debug, Error)]
pub enum DecompositionError {
    #[error("at least {min} trials required, got {found}")]
    TooFewTrials { min: usize, found: usize },
    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: IterationError,
    },
    #[error("H-norm error requires known minimizer (euclidean backend)")]
    HNormRequiresMinimizer,
    #[error("regularization parameter must be positive, got {0}")]
    InvalidLambda(f64),
    #[error("eigenvalues must be finite and nonnegative, found {0}")]
    InvalidEigenvalue(f64),
    #[error("rate fit needs at least 3 points with positive error, {remaining} remain")]
    TooFewRatePoints { remaining: usize },
    #[error("source exponent must be positive, got {0}")]
    InvalidZeta(f64),
    #[error(transparent)]
    Iteration(#[from] IterationError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// `‖Sh − f‖²` on the surrogate: `(1/N) Σ (h(x̂_i) − f(x̂_i))²`.
pub fn excess_risk(h: &HypothesisVector, surrogate: &Surrogate) -> Result<f64, DecompositionError> {
    let eval = PointEvaluator::new(h, surrogate.points(), Execution::default())?;
    Ok(mean_sq_diff(&eval.values(h)?, surrogate.values()))
}

/// Everything `decompose` needs besides the data.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecomposeSpec {
    pub space: SpaceSpec,
    pub algorithm: Algorithm,
    pub schedule: StepSchedule,
    pub iterations: usize,
    pub trials: usize,
    pub base_seed: u64,
    pub checkpoints: Checkpoints,
}

/// One checkpoint of a [`DecompositionReport`]; field order is the CSV order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRow {
    pub t: usize,
    pub pass: usize,
    pub bias_sq: f64,
    pub sample_var_sq: f64,
    pub comp_var_sq: f64,
    pub total: f64,
    pub total_se: f64,
    pub ineq_ok: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub rows: Vec<DecompositionRow>,
    /// Monte Carlo standard errors of `comp_var_sq`, aligned with `rows`.
    pub comp_var_se: Vec<f64>,
    pub trials: usize,
    pub algorithm: Algorithm,
    pub batch_size: usize,
    pub sample_size: usize,
    pub surrogate_size: usize,
}

impl DecompositionReport {
    /// Index of the row with the smallest total error (first on ties).
    pub fn total_minimizer(&self) -> Option<usize> {
        crate::stopping::argmin_first(self.rows.iter().map(|r| r.total))
    }

    pub fn all_inequalities_hold(&self) -> bool {
        self.rows.iter().all(|r| r.ineq_ok)
    }

    /// CSV with columns `t, pass, bias_sq, sample_var_sq, comp_var_sq, total,
    /// total_se, ineq_ok`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Whether `total ≤ 2·bias² + 2·sample_var² + comp_var² + 5·SE`.
pub fn decomposition_inequality(row: &DecompositionRow, comp_se: f64) -> bool {
    let se = (row.total_se * row.total_se + comp_se * comp_se).sqrt();
    row.total <= 2.0 * row.bias_sq + 2.0 * row.sample_var_sq + row.comp_var_sq + DECOMPOSITION_SE_BAND * se
}

/// Estimates the three error terms at every checkpoint.
///
/// The population iteration runs once on the surrogate, batch GM once on the
/// sample, and SGM `trials` times with plan seeds `mix_seed(base_seed, r)`.
/// With `Algorithm::Batch` the learning sequence is the batch iterate itself,
/// so the computational term is exactly zero and one run suffices.
pub fn decompose(
    sample: &Sample,
    surrogate: &Surrogate,
    spec: &DecomposeSpec,
    exec: Execution,
) -> Result<DecompositionReport, DecompositionError> {
    let batch = matches!(spec.algorithm, Algorithm::Batch);
    if !batch && spec.trials < 2 {
        return Err(DecompositionError::TooFewTrials {
            min: 2,
            found: spec.trials,
        });
    }
    let train = TrainingSet::with_execution(
        sample.points().clone(),
        sample.targets().to_vec(),
        spec.space,
        exec,
    )?;
    let m = train.len();
    let b = spec.algorithm.batch_size(m);
    let population = surrogate.as_training_set(spec.space, exec)?;

    let mu = run_population_with(&population, &spec.schedule, spec.iterations, &spec.checkpoints, exec)?;
    let nu = run_batch_gm_with(&train, &spec.schedule, spec.iterations, &spec.checkpoints, exec)?;

    let f = surrogate.values();
    let on_surrogate = PointEvaluator::new(&train.zero(), surrogate.points(), exec)?;
    let pop_eval = PointEvaluator::new(&population.zero(), surrogate.points(), exec)?;

    let mu_values = values_at(&pop_eval, &mu)?;
    let nu_values = values_at(&on_surrogate, &nu)?;
    let bias: Vec<f64> = mu_values.iter().map(|v| mean_sq_diff(v, f)).collect();
    let sample_var: Vec<f64> = mu_values
        .iter()
        .zip(&nu_values)
        .map(|(mv, nv)| mean_sq_diff(nv, mv))
        .collect();

    let k = spec.checkpoints.len();
    let (comp, comp_se, total, total_se, trials) = if batch {
        let total: Vec<f64> = nu_values.iter().map(|v| mean_sq_diff(v, f)).collect();
        (vec![0.0; k], vec![0.0; k], total, vec![0.0; k], 1)
    } else {
        // Each trial yields (comp_r, total_r) per checkpoint.
        let per_trial: Vec<Result<(Vec<f64>, Vec<f64>), DecompositionError>> =
            Execution::map(exec, spec.trials, |r| {
                let plan = sample_index_plan(m, b, spec.iterations, mix_seed(spec.base_seed, r as u64))
                    .map_err(|source| DecompositionError::Trial { trial: r, source })?;
                let omega = run_sgm(&train, &spec.schedule, &plan, &spec.checkpoints)
                    .map_err(|source| DecompositionError::Trial { trial: r, source })?;
                let mut comp = Vec::with_capacity(k);
                let mut total = Vec::with_capacity(k);
                for (h, nv) in omega.iterates().iter().zip(&nu_values) {
                    let w = on_surrogate.values(h)?;
                    comp.push(mean_sq_diff(&w, nv));
                    total.push(mean_sq_diff(&w, f));
                }
                Ok((comp, total))
            });
        let mut comp_trials = vec![Vec::with_capacity(spec.trials); k];
        let mut total_trials = vec![Vec::with_capacity(spec.trials); k];
        for res in per_trial {
            let (c, t) = res?;
            for j in 0..k {
                comp_trials[j].push(c[j]);
                total_trials[j].push(t[j]);
            }
        }
        let (comp, comp_se): (Vec<f64>, Vec<f64>) = comp_trials.iter().map(|v| mean_and_se(v)).unzip();
        let (total, total_se): (Vec<f64>, Vec<f64>) = total_trials.iter().map(|v| mean_and_se(v)).unzip();
        (comp, comp_se, total, total_se, spec.trials)
    };

    let rows = (0..k)
        .map(|j| {
            let mut row = DecompositionRow {
                t: mu.checkpoints()[j],
                pass: crate::schedules::passes(b, mu.checkpoints()[j], m),
                bias_sq: bias[j],
                sample_var_sq: sample_var[j],
                comp_var_sq: comp[j],
                total: total[j],
                total_se: total_se[j],
                ineq_ok: false,
            };
            row.ineq_ok = decomposition_inequality(&row, comp_se[j]);
            row
        })
        .collect();

    Ok(DecompositionReport {
        rows,
        comp_var_se: comp_se,
        trials,
        algorithm: spec.algorithm,
        batch_size: b,
        sample_size: m,
        surrogate_size: surrogate.len(),
    })
}

fn values_at(eval: &PointEvaluator, traj: &Trajectory) -> Result<Vec<Vec<f64>>, SpaceError> {
    traj.iterates().iter().map(|h| eval.values(h)).collect()
}

/// `‖h − ω†‖²_H`; only defined when both live in the euclidean backend.
pub fn h_norm_error(h: &HypothesisVector, w_dagger: &HypothesisVector) -> Result<f64, DecompositionError> {
    if h.anchors().is_some() || w_dagger.anchors().is_some() {
        return Err(DecompositionError::HNormRequiresMinimizer);
    }
    Ok(h.combine(1.0, w_dagger, -1.0)?.norm_sq())
}

/// `Σ σ_i / (σ_i + λ)`.
pub fn effective_dimension(eigenvalues: &[f64], lambda: f64) -> Result<f64, DecompositionError> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(DecompositionError::InvalidLambda(lambda));
    }
    if let Some(&bad) = eigenvalues.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return Err(DecompositionError::InvalidEigenvalue(bad));
    }
    Ok(compensated_sum(eigenvalues.iter().map(|s| s / (s + lambda))))
}

/// Least-squares line through `(ln m, ln error)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
    /// Pairs dropped because their error was not positive.
    pub excluded: Vec<(f64, f64)>,
}

pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<RateFit, DecompositionError> {
    let (kept, excluded): (Vec<(f64, f64)>, Vec<(f64, f64)>) = pairs
        .iter()
        .copied()
        .partition(|&(m, e)| e > 0.0 && e.is_finite() && m > 0.0 && m.is_finite());
    if kept.len() < 3 {
        return Err(DecompositionError::TooFewRatePoints { remaining: kept.len() });
    }
    let xs: Vec<f64> = kept.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = kept.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(DecompositionError::TooFewRatePoints { remaining: 1 });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let r_squared = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        points_used: kept.len(),
        excluded,
    })
}

/// Monte Carlo comparison of `E_J[ω_t]` with `ν_t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnbiasednessReport {
    /// Iterate index: `ω_t` after `t − 1` updates.
    pub t: usize,
    pub trials: usize,
    /// `‖(1/R) Σ_r ω_t^{(r)} − ν_t‖_H`.
    pub deviation: f64,
    /// `(1/(R−1)) Σ_r ‖ω_t^{(r)} − ω̄_t‖²_H`.
    pub trace_variance: f64,
    /// `(trace_variance / R)^{1/2}`.
    pub standard_error: f64,
    pub pass: bool,
}

/// Runs `trials` independent SGM plans for `t − 1` updates and compares the
/// mean iterate with batch GM under the same schedule.
pub fn unbiasedness_check(
    train: &TrainingSet,
    schedule: &StepSchedule,
    b: usize,
    t: usize,
    trials: usize,
    base_seed: u64,
    exec: Execution,
) -> Result<UnbiasednessReport, DecompositionError> {
    if trials < 2 {
        return Err(DecompositionError::TooFewTrials { min: 2, found: trials });
    }
    let m = train.len();
    if b < 1 || b > m {
        return Err(IterationError::BatchOutOfRange { b, m }.into());
    }
    if t <= 1 {
        return Ok(UnbiasednessReport {
            t,
            trials,
            deviation: 0.0,
            trace_variance: 0.0,
            standard_error: 0.0,
            pass: true,
        });
    }
    let updates = t - 1;
    let last = Checkpoints::last(updates);
    let nu = run_batch_gm_with(train, schedule, updates, &last, exec)?;
    let nu = nu.last().expect("one checkpoint");

    let runs: Vec<Result<Vec<f64>, DecompositionError>> = exec.map(trials, |r| {
        let plan = sample_index_plan(m, b, updates, mix_seed(base_seed, r as u64))
            .map_err(|source| DecompositionError::Trial { trial: r, source })?;
        let traj = run_sgm(train, schedule, &plan, &last)
            .map_err(|source| DecompositionError::Trial { trial: r, source })?;
        Ok(traj.last().expect("one checkpoint").coefficients().to_vec())
    });
    let mut iterates = Vec::with_capacity(trials);
    for run in runs {
        iterates.push(run?);
    }
    let len = train.coefficient_len();
    // Running mean: exact when every trial produced the same iterate.
    let mut mean = vec![0.0; len];
    for (r, w) in iterates.iter().enumerate() {
        for (a, v) in mean.iter_mut().zip(w) {
            *a += (v - *a) / (r + 1) as f64;
        }
    }

    let backend = train.backend();
    let to_h = |c: Vec<f64>| HypothesisVector::from_parts(backend.clone(), c);
    let sq_norm = |c: Vec<f64>| to_h(c).norm_sq().max(0.0);
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<f64>>();

    let deviation = sq_norm(diff(&mean, nu.coefficients())).sqrt();
    let spread: Vec<f64> = iterates.iter().map(|w| sq_norm(diff(w, &mean))).collect();
    let trace_variance = compensated_sum(spread) / (trials - 1) as f64;
    let standard_error = (trace_variance / trials as f64).sqrt();
    Ok(UnbiasednessReport {
        t,
        trials,
        deviation,
        trace_variance,
        standard_error,
        pass: deviation <= UNBIASEDNESS_SE_BAND * standard_error,
    })
}

/// Source radius `R_ζ = ‖L^{-ζ} f_H‖` for a linear target `f_H = ⟨ω†, ·⟩`
/// under the empirical measure on `points`.
///
/// With covariance `T = (1/N) Σ x xᵀ = Σ σ_i u_i u_iᵀ`,
/// `R_ζ² = Σ σ_i^{1−2ζ} ⟨u_i, ω†⟩²`. Directions with `σ_i = 0` carry no mass
/// under the measure and are skipped.
pub fn source_radius(points: &Points, w_dagger: &[f64], zeta: f64) -> Result<f64, DecompositionError> {
    if !(zeta.is_finite() && zeta > 0.0) {
        return Err(DecompositionError::InvalidZeta(zeta));
    }
    let (values, vectors) = covariance_eigen(points, w_dagger.len())?;
    let scale = values.iter().copied().fold(0.0, f64::max);
    let mut acc = Vec::with_capacity(values.len());
    for (i, &s) in values.iter().enumerate() {
        if s <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            continue;
        }
        let proj: f64 = (0..w_dagger.len()).map(|k| vectors[(k, i)] * w_dagger[k]).sum();
        acc.push(s.powf(1.0 - 2.0 * zeta) * proj * proj);
    }
    Ok(compensated_sum(acc).sqrt())
}

/// Eigenvalues (descending) of the empirical covariance `(1/N) Σ x xᵀ`.
pub fn covariance_eigenvalues(points: &Points) -> Vec<f64> {
    let (mut values, _) = covariance_eigen(points, points.dim()).expect("dimension matches");
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

fn covariance_eigen(points: &Points, dim: usize) -> Result<(Vec<f64>, nalgebra::DMatrix<f64>), SpaceError> {
    if points.dim() != dim {
        return Err(SpaceError::DimensionMismatch {
            expected: points.dim(),
            found: dim,
        });
    }
    let n = points.len() as f64;
    let x = nalgebra::DMatrix::from_row_slice(points.len(), dim, points.as_slice());
    let cov = (x.transpose() * &x) / n;
    let eig = cov.symmetric_eigen();
    Ok((eig.eigenvalues.iter().map(|v| v.max(0.0)).collect(), eig.eigenvectors))
}

/// `R (ζ / (2 Σ_{j=1}^t η_j))^ζ`, the bound on `‖Sμ_{t+1} − f_H‖`.
/// Infinite at `t = 0`.
pub fn bias_bound(radius: f64, zeta: f64, schedule: &StepSchedule, t: usize) -> f64 {
    if t == 0 {
        return f64::INFINITY;
    }
    radius * (zeta / (2.0 * schedule.sum(1, t))).powf(zeta)
}

/// `R κ^{2ζ−1}`, the bound on `‖μ_t‖_H` for `ζ ≥ 1/2`.
pub fn iterate_norm_bound(radius: f64, zeta: f64, kappa_sq: f64) -> f64 {
    radius * kappa_sq.powf(zeta - 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::f_rho_abs;
    use crate::kernels::KernelSpec;
    use crate::schedules::make_schedule;

    #[test]
    fn excess_risk_of_zero_on_three_points() {
        let sur = Surrogate::from_fn(Points::from_scalars(&[0.0, 0.25, 0.5]).unwrap(), |x| f_rho_abs(x[0])).unwrap();
        let r = excess_risk(&HypothesisVector::zero_euclidean(1), &sur).unwrap();
        // f_ρ = (0, -0.25, -0.5)
        assert!((r - 0.3125 / 3.0).abs() < 1e-15);
        let h = HypothesisVector::euclidean(vec![0.0]).unwrap();
        let exact = Surrogate::from_fn(Points::from_scalars(&[0.0, 1.0]).unwrap(), |x| f_rho_abs(x[0])).unwrap();
        assert_eq!(excess_risk(&h, &exact).unwrap(), 0.0);
    }

    #[test]
    fn h_norm_examples() {
        let a = HypothesisVector::euclidean(vec![1.0, 0.0]).unwrap();
        let b = HypothesisVector::euclidean(vec![0.0, 1.0]).unwrap();
        assert_eq!(h_norm_error(&a, &b).unwrap(), 2.0);
        assert_eq!(h_norm_error(&a, &a).unwrap(), 0.0);
        let anchors =
            crate::spaces::AnchorSet::new(KernelSpec::Sobolev, Points::from_scalars(&[0.5]).unwrap()).unwrap();
        let k = HypothesisVector::zero_kernel(anchors);
        let err = h_norm_error(&k, &a).unwrap_err();
        assert!(err.to_string().contains("H-norm error requires known minimizer"));
    }

    #[test]
    fn effective_dimension_examples() {
        let v = effective_dimension(&[1.0, 0.5], 0.5).unwrap();
        assert!((v - (1.0 / 1.5 + 0.5)).abs() < 1e-15);
        assert!(effective_dimension(&[1.0, 0.3], 1e12).unwrap() <= 1e-6);
        assert!(effective_dimension(&[1.0], 0.0).is_err());
        let eigs: Vec<f64> = (1..=4096).map(|i| 1.0 / (i as f64 * i as f64)).collect();
        let brute: f64 = eigs.iter().map(|s| s / (s + 0.01)).sum();
        assert!((effective_dimension(&eigs, 0.01).unwrap() - brute).abs() < 1e-12);
    }

    #[test]
    fn rate_fit_exact_power_laws() {
        let pairs: Vec<(f64, f64)> = [64.0f64, 128.0, 256.0].iter().map(|&m| (m, 3.0 * m.powf(-0.5))).collect();
        let fit = fit_rate(&pairs).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        let pairs: Vec<(f64, f64)> = [64.0f64, 128.0, 256.0].iter().map(|&m| (m, 3.0 / m)).collect();
        assert!((fit_rate(&pairs).unwrap().slope + 1.0).abs() < 1e-12);
        let pairs = [(1.0, 1.0), (2.0, 0.0), (3.0, 0.5)];
        assert!(matches!(
            fit_rate(&pairs),
            Err(DecompositionError::TooFewRatePoints { remaining: 2 })
        ));
    }

    #[test]
    fn unbiasedness_trivial_cases() {
        let train = TrainingSet::new(Points::from_scalars(&[0.7]).unwrap(), vec![0.3], SpaceSpec::Euclidean).unwrap();
        let s = make_schedule(0.5, 0.0, 1.0).unwrap();
        let rep = unbiasedness_check(&train, &s, 1, 20, 100, 1, Execution::default()).unwrap();
        assert_eq!(rep.deviation, 0.0);
        assert!(rep.pass);
        let rep = unbiasedness_check(&train, &s, 1, 1, 100, 1, Execution::default()).unwrap();
        assert_eq!(rep.deviation, 0.0);
    }

    #[test]
    fn single_point_sample_has_zero_comp_var() {
        let sample = crate::data::gen_synthetic_abs(1, 4, 1.0).unwrap();
        let sur = Surrogate::uniform_grid(50, |x| f_rho_abs(x[0])).unwrap();
        let spec = DecomposeSpec {
            space: SpaceSpec::Kernel {
                kernel: KernelSpec::gaussian(0.2).unwrap(),
            },
            algorithm: Algorithm::Sgm { batch: 1 },
            schedule: make_schedule(0.5, 0.0, 1.0).unwrap(),
            iterations: 10,
            trials: 5,
            base_seed: 0,
            checkpoints: Checkpoints::all(10),
        };
        let rep = decompose(&sample, &sur, &spec, Execution::default()).unwrap();
        assert!(rep.rows.iter().all(|r| r.comp_var_sq == 0.0 && r.ineq_ok));
    }

    #[test]
    fn source_radius_identity_covariance() {
        // points ±e_1, ±e_2: covariance = I/2
        let pts = Points::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]]).unwrap();
        let r = source_radius(&pts, &[3.0, 4.0], 0.5).unwrap();
        assert!((r - 5.0).abs() < 1e-12);
        let r = source_radius(&pts, &[3.0, 4.0], 1.0).unwrap();
        assert!((r - 5.0 * 2f64.sqrt()).abs() < 1e-12);
    }
}
