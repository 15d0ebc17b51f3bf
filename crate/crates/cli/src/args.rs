use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hilbert_sgm::experiments::Preset;
use hilbert_sgm::{Checkpoints, CorollaryId, KernelSpec, SpaceSpec};
use serde::{Serialize, Serializer};

pub const AFTER_HELP: &str = "\
Exit codes:
  0  success, every requested check passed
  1  a check failed (lemma verdict, decomposition inequality)
  2  usage error (unknown flag, malformed value)
  3  I/O error (unreadable input, unwritable output)
  4  invalid configuration (bad config file, inconsistent parameters)
  5  an iteration diverged

Every flag of a subcommand can also be set in a --config file, either as
`key = value` lines (e.g. `trials = 20`) or as a JSON object; a JSON
artifact written by this tool is accepted as-is and reruns its embedded
configuration. Flags given on the command line win over the file.";

#[derive(Debug, Parser)]
#[command(name = "hsgm", version, about = "Mini-batch SGM and batch gradient descent experiments", after_help = AFTER_HELP)]
#[command(args_override_self = true)]
pub struct Cli {
    /// Configuration file (key = value lines, JSON object, or JSON artifact).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads for trial-level parallelism (0 = one per core).
    #[arg(long, global = true, env = "HSGM_THREADS", value_name = "N")]
    pub threads: Option<usize>,

    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bias / sample-variance / computational-variance decomposition over checkpoints.
    #[command(after_help = AFTER_HELP, args_override_self = true)]
    Decompose(DecomposeArgs),
    /// Excess risk at the recipe stopping time across sample sizes, with log-log fits.
    #[command(after_help = AFTER_HELP, args_override_self = true)]
    Rates(RatesArgs),
    /// Step size, mini-batch size and stopping time of every recipe.
    #[command(after_help = AFTER_HELP, args_override_self = true)]
    Recipes(RecipesArgs),
    /// Numerical check of the deterministic summation and contraction bounds.
    #[command(after_help = AFTER_HELP, args_override_self = true)]
    Lemmas(LemmasArgs),
    /// Train on a dataset, stop early on a validation split, emit the model.
    #[command(after_help = AFTER_HELP, args_override_self = true)]
    Run(RunArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendArg {
    Euclidean,
    Kernel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelArg {
    Gaussian,
    Sobolev,
    Linear,
}

#[derive(Clone, Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SpaceArgs {
    /// Hypothesis space representation.
    #[arg(long, value_enum, default_value_t = BackendArg::Kernel)]
    pub backend: BackendArg,
    /// Kernel of the kernel backend.
    #[arg(long, value_enum, default_value_t = KernelArg::Gaussian)]
    pub kernel: KernelArg,
    /// Gaussian kernel bandwidth.
    #[arg(long, default_value_t = 0.2)]
    pub sigma: f64,
}

impl SpaceArgs {
    pub fn spec(&self) -> Result<SpaceSpec, hilbert_sgm::KernelError> {
        Ok(match self.backend {
            BackendArg::Euclidean => SpaceSpec::Euclidean,
            BackendArg::Kernel => SpaceSpec::Kernel {
                kernel: match self.kernel {
                    KernelArg::Gaussian => KernelSpec::gaussian(self.sigma)?,
                    KernelArg::Sobolev => KernelSpec::Sobolev,
                    KernelArg::Linear => KernelSpec::Linear,
                },
            },
        })
    }
}

/// Where checkpoints are placed along a run of `T` iterations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckpointPolicy {
    /// End of every pass over the data.
    Passes,
    All,
    Last,
    Every(usize),
    /// About `n` log-spaced iterations.
    Log(usize),
}

impl CheckpointPolicy {
    pub fn resolve(self, m: usize, b: usize, iterations: usize) -> Checkpoints {
        match self {
            CheckpointPolicy::Passes => Checkpoints::at_passes(m, b, iterations),
            CheckpointPolicy::All => Checkpoints::all(iterations),
            CheckpointPolicy::Last => Checkpoints::last(iterations),
            CheckpointPolicy::Every(k) => Checkpoints::every(k, iterations),
            CheckpointPolicy::Log(n) => Checkpoints::log_spaced(iterations, n),
        }
    }
}

impl FromStr for CheckpointPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let count = |v: &str| -> Result<usize, String> {
            match v.parse::<usize>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(format!("expected a positive integer after ':', got '{v}'")),
            }
        };
        match s.split_once(':') {
            None if s == "passes" => Ok(CheckpointPolicy::Passes),
            None if s == "all" => Ok(CheckpointPolicy::All),
            None if s == "last" => Ok(CheckpointPolicy::Last),
            Some(("every", v)) => Ok(CheckpointPolicy::Every(count(v)?)),
            Some(("log", v)) => Ok(CheckpointPolicy::Log(count(v)?)),
            _ => Err(format!(
                "unknown checkpoint policy '{s}' (expected passes, all, last, every:K or log:N)"
            )),
        }
    }
}

impl fmt::Display for CheckpointPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckpointPolicy::Passes => f.write_str("passes"),
            CheckpointPolicy::All => f.write_str("all"),
            CheckpointPolicy::Last => f.write_str("last"),
            CheckpointPolicy::Every(k) => write!(f, "every:{k}"),
            CheckpointPolicy::Log(n) => write!(f, "log:{n}"),
        }
    }
}

impl Serialize for CheckpointPolicy {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Explicit algorithm and step-size choice, overriding preset or recipe values.
#[derive(Clone, Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct AlgorithmArgs {
    /// Mini-batch size of SGM.
    #[arg(long, conflicts_with = "batch_gm")]
    pub b: Option<usize>,
    /// Use full-gradient descent instead of SGM.
    #[arg(long)]
    pub batch_gm: bool,
    /// Step-size scale: eta_t = eta1 / kappa^2 * t^-theta.
    #[arg(long)]
    pub eta1: Option<f64>,
    /// Step-size decay exponent in [0, 1).
    #[arg(long)]
    pub theta: Option<f64>,
    /// Number of iterations T.
    #[arg(long)]
    pub iterations: Option<usize>,
}

#[derive(Clone, Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct DecomposeArgs {
    /// Simulation preset supplying batch size and step size.
    #[arg(long, default_value_t = Preset::Sec9Minibatch)]
    pub preset: Preset,
    /// Sample size.
    #[arg(long, default_value_t = 100)]
    pub m: usize,
    /// Standard deviation of the label noise.
    #[arg(long, default_value_t = 1.0)]
    pub noise_sd: f64,
    /// Points of the surrogate measure.
    #[arg(long, default_value_t = 2000)]
    pub surrogate_size: usize,
    /// Independent index plans.
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    /// Passes over the data (ignored when --iterations is set).
    #[arg(long, default_value_t = hilbert_sgm::experiments::SEC9_PASSES)]
    pub passes: usize,
    #[arg(long, default_value_t = 1)]
    pub data_seed: u64,
    #[arg(long, default_value_t = 2)]
    pub surrogate_seed: u64,
    /// Base seed of the per-trial index plans.
    #[arg(long, default_value_t = 3)]
    pub base_seed: u64,
    /// Checkpoint policy: passes, all, last, every:K or log:N.
    #[arg(long, default_value_t = CheckpointPolicy::Passes)]
    pub checkpoints: CheckpointPolicy,
    #[command(flatten)]
    #[serde(flatten)]
    pub space: SpaceArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub algorithm: AlgorithmArgs,
    /// CSV output (stdout when omitted).
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    /// JSON artifact with the report, configuration and seeds.
    #[arg(long, value_name = "PATH")]
    pub json: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorArg {
    /// x ~ U[0,1], y = |x - 1/2| - 1/2 + noise.
    SyntheticAbs,
    /// y = <w, x> + noise with bounded inputs.
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LawArg {
    CappedNormal,
    ScaledUniform,
}

#[derive(Clone, Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct GeneratorArgs {
    #[arg(long, value_enum, default_value_t = GeneratorArg::SyntheticAbs)]
    pub generator: GeneratorArg,
    /// Label noise (default 1 for synthetic-abs, 0.5 for linear).
    #[arg(long)]
    pub noise_sd: Option<f64>,
    /// Input dimension of the linear generator.
    #[arg(long, default_value_t = 10)]
    pub dim: usize,
    /// Ground-truth weights of the linear generator (default 1/sqrt(dim) each).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub w: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = LawArg::CappedNormal)]
    pub input_law: LawArg,
}

#[derive(Clone, Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct RatesArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: GeneratorArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub space: SpaceArgs,
    /// Recipe giving (b, eta, T*) at each sample size.
    #[arg(long, default_value_t = CorollaryId::C3)]
    pub corollary: CorollaryId,
    #[arg(long, default_value_t = 0.5)]
    pub zeta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = hilbert_sgm::schedules::DEFAULT_C_ETA)]
    pub c_eta: f64,
    /// Sample sizes.
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [64usize, 128, 256, 512, 1024])]
    pub ms: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 5)]
    pub base_seed: u64,
    #[arg(long, default_value_t = 2000)]
    pub surrogate_size: usize,
    #[arg(long, default_value_t = 6)]
    pub surrogate_seed: u64,
    /// CSV output, one row per sample size (stdout when omitted).
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    /// JSON artifact with the per-m table, fits, configuration and seeds.
    #[arg(long, value_name = "PATH")]
    pub json: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct RecipesArgs {
    #[arg(long, default_value_t = 100)]
    pub m: usize,
    #[arg(long, default_value_t = 0.5)]
    pub zeta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = hilbert_sgm::schedules::DEFAULT_C_ETA)]
    pub c_eta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub kappa_sq: f64,
    /// Only this recipe (all when omitted).
    #[arg(long)]
    pub corollary: Option<CorollaryId>,
    /// JSON output (stdout when omitted).
    #[arg(long, value_name = "PATH")]
    pub json: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct LemmasArgs {
    /// Largest t of the summation checks.
    #[arg(long, default_value_t = 10_000)]
    pub max_t: usize,
    /// Log-spaced t values per exponent.
    #[arg(long, default_value_t = 40)]
    pub grid_points: usize,
    /// Random spectra for the contraction check.
    #[arg(long, default_value_t = 100)]
    pub spectra: usize,
    #[arg(long, default_value_t = 20)]
    pub spectrum_size: usize,
    #[arg(long, default_value_t = 200)]
    pub max_contraction_t: usize,
    #[arg(long, default_value_t = 2018)]
    pub seed: u64,
    /// Verdict CSV (stdout when omitted).
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    /// JSON summary with configuration and failing verdicts.
    #[arg(long, value_name = "PATH")]
    pub json: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricArg {
    /// Misclassification for +-1 labels, mean squared error otherwise.
    Auto,
    Mse,
    Misclassification,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleArg {
    /// Smallest validation error.
    Holdout,
    /// Recipe stopping time (needs --corollary).
    Tstar,
}

#[derive(Clone, Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct RunArgs {
    /// CSV dataset (header x1..xd,y); a generator is used when omitted.
    #[arg(long, value_name = "PATH")]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub generator: GeneratorArgs,
    /// Generated sample size before splitting.
    #[arg(long, default_value_t = 500)]
    pub m: usize,
    #[arg(long, default_value_t = 1)]
    pub data_seed: u64,
    /// Train, validation, test fractions.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.6, 0.2, 0.2])]
    pub split: Vec<f64>,
    #[arg(long, default_value_t = 3)]
    pub split_seed: u64,
    /// Keep raw features instead of min-max scaling them on the training split.
    #[arg(long)]
    pub no_scale: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub space: SpaceArgs,
    /// Simulation preset (used unless --corollary is given).
    #[arg(long, default_value_t = Preset::Sec9Minibatch)]
    pub preset: Preset,
    /// Recipe sized on the training split; sets b, eta and T = T*.
    #[arg(long)]
    pub corollary: Option<CorollaryId>,
    #[arg(long, default_value_t = 0.5)]
    pub zeta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = hilbert_sgm::schedules::DEFAULT_C_ETA)]
    pub c_eta: f64,
    /// Passes over the training split for presets.
    #[arg(long, default_value_t = 50)]
    pub passes: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub algorithm: AlgorithmArgs,
    /// Seed of the SGM index plan.
    #[arg(long, default_value_t = 9)]
    pub seed: u64,
    #[arg(long, default_value_t = CheckpointPolicy::Passes)]
    pub checkpoints: CheckpointPolicy,
    #[arg(long, value_enum, default_value_t = MetricArg::Auto)]
    pub metric: MetricArg,
    #[arg(long, value_enum, default_value_t = RuleArg::Holdout)]
    pub rule: RuleArg,
    /// JSON output (stdout when omitted).
    #[arg(long, value_name = "PATH")]
    pub json: Option<PathBuf>,
}
