//! Ready-made experiments: the one-dimensional simulation presets, rate sweeps
//! over the sample size, and train/validate/stop runs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{f_rho_abs, gen_linear_attainable, gen_synthetic_abs, InputLaw, Sample};
use crate::decomposition::{decompose, fit_rate, h_norm_error, DecomposeSpec, DecompositionReport, RateFit};
use crate::exec::Execution;
use crate::iterations::{
    mix_seed, run_algorithm, Algorithm, Checkpoints, SpaceSpec, Surrogate, TrainingSet, Trajectory,
};
use crate::kernels::KernelSpec;
use crate::numeric::{guarded_ceil, mean_and_se, mean_sq_diff};
use crate::schedules::{recipe, CorollaryId, Recipe, RecipeParams, StepSchedule};
use crate::spaces::{HypothesisVector, PointEvaluator, Points};
use crate::stopping::{holdout_stop, StoppingOutcome, ValidationMetric};
use crate::Error;

pub const SEC9_SAMPLE_SIZE: usize = 100;
pub const SEC9_SIGMA: f64 = 0.2;
pub const SEC9_NOISE_SD: f64 = 1.0;
pub const SEC9_SURROGATE_SIZE: usize = 2000;
pub const SEC9_TRIALS: usize = 50;
/// Passes over the data run by the simulation presets.
pub const SEC9_PASSES: usize = 60;

/// The three simulation configurations on `f_ρ(x) = |x − 1/2| − 1/2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    /// `b = ⌈√m⌉`, `η = 1/(8√m)`.
    #[serde(rename = "sec9-minibatch")]
    Sec9Minibatch,
    /// `b = 1`, `η = 1/(8m)`.
    #[serde(rename = "sec9-sgm")]
    Sec9Sgm,
    /// Batch GM, `η = 1/8`.
    #[serde(rename = "sec9-batch")]
    Sec9Batch,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Sec9Minibatch, Preset::Sec9Sgm, Preset::Sec9Batch];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Sec9Minibatch => "sec9-minibatch",
            Preset::Sec9Sgm => "sec9-sgm",
            Preset::Sec9Batch => "sec9-batch",
        }
    }

    pub fn algorithm(&self, m: usize) -> Algorithm {
        match self {
            Preset::Sec9Minibatch => Algorithm::Sgm {
                batch: guarded_ceil((m as f64).sqrt()).min(m),
            },
            Preset::Sec9Sgm => Algorithm::Sgm { batch: 1 },
            Preset::Sec9Batch => Algorithm::Batch,
        }
    }

    pub fn eta1(&self, m: usize) -> f64 {
        match self {
            Preset::Sec9Minibatch => 1.0 / (8.0 * (m as f64).sqrt()),
            Preset::Sec9Sgm => 1.0 / (8.0 * m as f64),
            Preset::Sec9Batch => 0.125,
        }
    }

    /// Constant schedule with `κ² = 1` (Gaussian kernel).
    pub fn schedule(&self, m: usize) -> StepSchedule {
        StepSchedule::constant(self.eta1(m), 1.0).expect("positive step")
    }

    /// `⌈m p / b⌉` iterations for `p` passes.
    pub fn iterations(&self, m: usize, passes: usize) -> usize {
        let b = self.algorithm(m).batch_size(m);
        (m * passes).div_ceil(b).max(1)
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                format!(
                    "unknown preset '{s}' (expected one of {})",
                    Preset::ALL.map(|p| p.name()).join(", ")
                )
            })
    }
}

/// Inputs of a simulation-preset decomposition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sec9Setup {
    pub m: usize,
    pub sigma: f64,
    pub noise_sd: f64,
    pub surrogate_size: usize,
    pub trials: usize,
    pub passes: usize,
    pub data_seed: u64,
    pub surrogate_seed: u64,
    pub base_seed: u64,
}

impl Default for Sec9Setup {
    fn default() -> Self {
        Sec9Setup {
            m: SEC9_SAMPLE_SIZE,
            sigma: SEC9_SIGMA,
            noise_sd: SEC9_NOISE_SD,
            surrogate_size: SEC9_SURROGATE_SIZE,
            trials: SEC9_TRIALS,
            passes: SEC9_PASSES,
            data_seed: 1,
            surrogate_seed: 2,
            base_seed: 3,
        }
    }
}

impl Sec9Setup {
    pub fn decompose_spec(&self, preset: Preset) -> Result<DecomposeSpec, Error> {
        let algorithm = preset.algorithm(self.m);
        let iterations = preset.iterations(self.m, self.passes);
        Ok(DecomposeSpec {
            space: SpaceSpec::Kernel {
                kernel: KernelSpec::gaussian(self.sigma)?,
            },
            algorithm,
            schedule: preset.schedule(self.m),
            iterations,
            trials: self.trials,
            base_seed: self.base_seed,
            checkpoints: Checkpoints::at_passes(self.m, algorithm.batch_size(self.m), iterations),
        })
    }
}

/// Error decomposition for one simulation preset, one checkpoint per pass.
pub fn sec9_decompose(preset: Preset, setup: &Sec9Setup, exec: Execution) -> Result<DecompositionReport, Error> {
    let sample = gen_synthetic_abs(setup.m, setup.data_seed, setup.noise_sd)?;
    let surrogate = Surrogate::uniform_iid(setup.surrogate_size, setup.surrogate_seed, |x| f_rho_abs(x[0]))?;
    let spec = setup.decompose_spec(preset)?;
    Ok(decompose(&sample, &surrogate, &spec, exec)?)
}

/// Data law of a rate sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Generator {
    SyntheticAbs { noise_sd: f64 },
    LinearAttainable { w_dagger: Vec<f64>, noise_sd: f64, law: InputLaw },
}

impl Generator {
    pub fn draw(&self, m: usize, seed: u64) -> Result<(Sample, Option<HypothesisVector>), Error> {
        Ok(match self {
            Generator::SyntheticAbs { noise_sd } => (gen_synthetic_abs(m, seed, *noise_sd)?, None),
            Generator::LinearAttainable { w_dagger, noise_sd, law } => {
                let (s, w) = gen_linear_attainable(m, w_dagger, *noise_sd, seed, *law)?;
                (s, Some(w))
            }
        })
    }

    /// Surrogate measure with the regression function's values.
    pub fn surrogate(&self, n: usize, seed: u64) -> Result<Surrogate, Error> {
        Ok(match self {
            Generator::SyntheticAbs { .. } => Surrogate::uniform_iid(n, seed, |x| f_rho_abs(x[0]))?,
            Generator::LinearAttainable { w_dagger, law, .. } => {
                let (s, _) = gen_linear_attainable(n, w_dagger, 0.0, seed, *law)?;
                let (points, values) = s.into_parts();
                Surrogate::new(points, values)?
            }
        })
    }
}

/// `κ²` used to normalize recipe steps: the kernel constant, or 1 for the
/// euclidean generators, whose inputs have norm at most 1.
pub fn space_kappa_sq(space: &SpaceSpec) -> f64 {
    match space {
        SpaceSpec::Euclidean => 1.0,
        SpaceSpec::Kernel { kernel } => kernel.kappa_sq(&Points::from_scalars(&[0.0]).expect("one point")),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSweepSpec {
    pub generator: Generator,
    pub space: SpaceSpec,
    pub corollary: CorollaryId,
    pub zeta: f64,
    pub gamma: f64,
    pub epsilon: Option<f64>,
    pub c_eta: f64,
    pub ms: Vec<usize>,
    pub trials: usize,
    pub base_seed: u64,
    pub surrogate_size: usize,
    pub surrogate_seed: u64,
}

impl RateSweepSpec {
    pub fn recipe_for(&self, m: usize) -> Result<Recipe, Error> {
        let params = RecipeParams {
            m,
            zeta: self.zeta,
            gamma: self.gamma,
            epsilon: self.epsilon,
            c_eta: self.c_eta,
            kappa_sq: space_kappa_sq(&self.space),
        };
        Ok(recipe(self.corollary, &params)?)
    }
}

/// Excess risk (and `H`-norm error, when the minimizer is known) at `T*`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub m: usize,
    pub b: usize,
    pub eta1: f64,
    pub theta: f64,
    pub t_star: usize,
    pub passes: usize,
    pub excess_risk: f64,
    pub excess_risk_se: f64,
    pub h_norm_error: Option<f64>,
    pub h_norm_error_se: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSweep {
    pub points: Vec<RatePoint>,
    /// Absent when fewer than three sample sizes were run.
    pub excess_risk_fit: Option<RateFit>,
    pub h_norm_fit: Option<RateFit>,
}

/// Seeds of trial `r` at sample size `m`: (sample, index plan).
pub fn trial_seeds(base_seed: u64, m: usize, r: usize) -> (u64, u64) {
    let per_m = mix_seed(base_seed, m as u64);
    (mix_seed(per_m, 2 * r as u64), mix_seed(per_m, 2 * r as u64 + 1))
}

/// Runs the recipe at every `m`, averaging the final-iterate errors over
/// trials (fresh sample and index plan per trial), and fits the log-log
/// slopes.
pub fn rate_sweep(spec: &RateSweepSpec, exec: Execution) -> Result<RateSweep, Error> {
    let surrogate = spec.generator.surrogate(spec.surrogate_size, spec.surrogate_seed)?;
    let recipes: Vec<Recipe> = spec.ms.iter().map(|&m| spec.recipe_for(m)).collect::<Result<_, _>>()?;
    let jobs: Vec<(usize, usize)> = (0..spec.ms.len())
        .flat_map(|i| (0..spec.trials).map(move |r| (i, r)))
        .collect();
    let results: Vec<Result<(f64, Option<f64>), Error>> = exec.map(jobs.len(), |j| {
        let (i, r) = jobs[j];
        let m = spec.ms[i];
        let rec = &recipes[i];
        let (data_seed, plan_seed) = trial_seeds(spec.base_seed, m, r);
        let (sample, w_dagger) = spec.generator.draw(m, data_seed)?;
        let (points, targets) = sample.into_parts();
        let train = TrainingSet::with_execution(points, targets, spec.space, Execution::Sequential)?;
        let traj = run_algorithm(
            &train,
            rec.algorithm(),
            &rec.schedule(),
            rec.t_star,
            plan_seed,
            &Checkpoints::last(rec.t_star),
            Execution::Sequential,
        )
        .map_err(|source| Error::Trial { trial: r, source: Box::new(source.into()) })?;
        let h = traj.last().expect("one checkpoint");
        let eval = PointEvaluator::new(h, surrogate.points(), Execution::Sequential)?;
        let risk = mean_sq_diff(&eval.values(h)?, surrogate.values());
        let hn = match &w_dagger {
            Some(w) if matches!(spec.space, SpaceSpec::Euclidean) => Some(h_norm_error(h, w)?),
            _ => None,
        };
        Ok((risk, hn))
    });
    let mut per_m: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); spec.ms.len()];
    for (j, res) in results.into_iter().enumerate() {
        let (risk, hn) = res?;
        let i = jobs[j].0;
        per_m[i].0.push(risk);
        if let Some(v) = hn {
            per_m[i].1.push(v);
        }
    }
    let points: Vec<RatePoint> = spec
        .ms
        .iter()
        .zip(&recipes)
        .zip(&per_m)
        .map(|((&m, rec), (risks, hns))| {
            let (excess_risk, excess_risk_se) = mean_and_se(risks);
            let (h_norm_error, h_norm_error_se) = if hns.is_empty() {
                (None, None)
            } else {
                let (a, b) = mean_and_se(hns);
                (Some(a), Some(b))
            };
            RatePoint {
                m,
                b: rec.b,
                eta1: rec.eta1,
                theta: rec.theta,
                t_star: rec.t_star,
                passes: rec.passes,
                excess_risk,
                excess_risk_se,
                h_norm_error,
                h_norm_error_se,
            }
        })
        .collect();
    let fits = points.len() >= 3;
    let excess_risk_fit = if fits {
        Some(fit_rate(&points.iter().map(|p| (p.m as f64, p.excess_risk)).collect::<Vec<_>>())?)
    } else {
        None
    };
    let h_norm_fit = if fits && points.iter().all(|p| p.h_norm_error.is_some()) {
        Some(fit_rate(
            &points
                .iter()
                .map(|p| (p.m as f64, p.h_norm_error.expect("checked")))
                .collect::<Vec<_>>(),
        )?)
    } else {
        None
    };
    Ok(RateSweep {
        points,
        excess_risk_fit,
        h_norm_fit,
    })
}

/// Training run followed by hold-out stopping.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitSpec {
    pub space: SpaceSpec,
    pub algorithm: Algorithm,
    pub schedule: StepSchedule,
    pub iterations: usize,
    pub seed: u64,
    pub checkpoints: Checkpoints,
    pub metric: ValidationMetric,
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub trajectory: Trajectory,
    pub stopping: StoppingOutcome,
    pub chosen: HypothesisVector,
}

pub fn fit_and_stop(
    train: &Sample,
    validation: &Sample,
    spec: &FitSpec,
    exec: Execution,
) -> Result<FitOutcome, Error> {
    let set = TrainingSet::with_execution(train.points().clone(), train.targets().to_vec(), spec.space, exec)?;
    let trajectory = run_algorithm(
        &set,
        spec.algorithm,
        &spec.schedule,
        spec.iterations,
        spec.seed,
        &spec.checkpoints,
        exec,
    )?;
    let stopping = holdout_stop(&trajectory, validation, spec.metric, exec)?;
    let chosen = trajectory.iterates()[stopping.index].clone();
    Ok(FitOutcome {
        trajectory,
        stopping,
        chosen,
    })
}

/// Mean squared error or misclassification of `h` on `sample`.
pub fn score(h: &HypothesisVector, sample: &Sample, metric: ValidationMetric) -> Result<f64, Error> {
    let eval = PointEvaluator::new(h, sample.points(), Execution::default())?;
    let values = eval.values(h)?;
    Ok(match metric {
        ValidationMetric::Mse => mean_sq_diff(&values, sample.targets()),
        ValidationMetric::Misclassification => {
            crate::data::misclassification_of_values(&values, sample.targets())?
        }
    })
}
