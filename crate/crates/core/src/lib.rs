//! Multi-pass mini-batch stochastic gradient methods and batch gradient
//! descent for least squares in Hilbert spaces.
//!
//! The crate runs SGM, batch GM and the population iteration over a
//! euclidean or kernel hypothesis space, splits their error into bias,
//! sample variance and computational variance, instantiates the step-size /
//! mini-batch / stopping recipes, and checks the deterministic lemmas behind
//! the convergence analysis.
//!
//! ```
//! use hilbert_sgm::{
//!     gen_synthetic_abs, run_sgm, sample_index_plan, Checkpoints, KernelSpec, SpaceSpec,
//!     StepSchedule, TrainingSet,
//! };
//!
//! let sample = gen_synthetic_abs(50, 7, 1.0).unwrap();
//! let (points, targets) = sample.into_parts();
//! let space = SpaceSpec::Kernel { kernel: KernelSpec::gaussian(0.2).unwrap() };
//! let train = TrainingSet::new(points, targets, space).unwrap();
//! let schedule = StepSchedule::constant(1.0 / 400.0, 1.0).unwrap();
//! let plan = sample_index_plan(50, 1, 500, 11).unwrap();
//! let traj = run_sgm(&train, &schedule, &plan, &Checkpoints::every(50, 500)).unwrap();
//! assert_eq!(traj.passes(), &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10]);
//! ```

pub mod data;
pub mod decomposition;
pub mod exec;
pub mod experiments;
pub mod iterations;
pub mod kernels;
pub mod lemma_lab;
pub mod numeric;
pub mod schedules;
pub mod spaces;
pub mod stopping;

pub use data::{
    f_rho_abs, gen_linear_attainable, gen_synthetic_abs, load_csv, misclassification, split, split3,
    write_csv, DataError, InputLaw, MinMaxScaler, Provenance, Sample,
};
pub use decomposition::{
    bias_bound, decompose, effective_dimension, excess_risk, fit_rate, h_norm_error,
    iterate_norm_bound, source_radius, unbiasedness_check, DecomposeSpec, DecompositionError,
    DecompositionReport, DecompositionRow, RateFit, UnbiasednessReport,
};
pub use exec::Execution;
pub use experiments::{Preset, RateSweep, RateSweepSpec};
pub use iterations::{
    mix_seed, run_algorithm, run_batch_gm, run_population, run_sgm, sample_index_plan, Algorithm,
    Checkpoints, IndexPlan, IterationError, SpaceSpec, Surrogate, TrainingSet, Trajectory,
};
pub use kernels::{build_gram, GramMatrix, KernelError, KernelSpec};
pub use lemma_lab::{LemmaError, LemmaVerdict};
pub use schedules::{
    make_schedule, passes, recipe, recipe_table, validate_schedule, CorollaryId, Recipe, RecipeParams,
    ScheduleError, StepSchedule,
};
pub use spaces::{AnchorSet, HypothesisVector, PointEvaluator, Points, SpaceError};
pub use stopping::{holdout_stop, StoppingError, StoppingOutcome, ValidationMetric};

/// Any error produced by the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Iteration(#[from] IterationError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Decomposition(#[from] DecompositionError),
    #[error(transparent)]
    Lemma(#[from] LemmaError),
    #[error(transparent)]
    Stopping(#[from] StoppingError),
    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Whether the failure is a numerical divergence of an iteration.
    pub fn is_divergence(&self) -> bool {
        match self {
            Error::Iteration(IterationError::Divergence { .. }) => true,
            Error::Decomposition(DecompositionError::Iteration(IterationError::Divergence { .. }))
            | Error::Decomposition(DecompositionError::Trial {
                source: IterationError::Divergence { .. },
                ..
            }) => true,
            Error::Trial { source, .. } => source.is_divergence(),
            _ => false,
        }
    }
}
