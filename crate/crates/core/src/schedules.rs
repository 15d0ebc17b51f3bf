//! Step-size laws and the parameter recipes `(b, η, T*)`.
//!
//! Step sizes follow `η_t = η₁ κ⁻² t^{-θ}` with `θ ∈ [0, 1)`. Recipes
//! instantiate the "`η ≃ …`" choices with a single proportionality constant
//! `c_η` (default `1/8`); all logarithms are natural.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::iterations::Algorithm;
use crate::numeric::{guarded_ceil, sum_range};

/// Default proportionality constant for `η ≃ …` recipes.
pub const DEFAULT_C_ETA: f64 = 0.125;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("base step size must be finite and positive, got {0}")]
    NonPositiveStep(f64),
    #[error("decay exponent must lie in [0, 1), got {0}")]
    InvalidTheta(f64),
    #[error("kappa^2 must be at least 1e-12, got {0}")]
    InvalidKappa(f64),
    #[error("regime requires epsilon (2*zeta + gamma = {0} <= 1)")]
    RegimeRequiresEpsilon(f64),
    #[error("epsilon must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("zeta must be positive, got {0}")]
    InvalidZeta(f64),
    #[error("gamma must lie in (0, 1], got {0}")]
    InvalidGamma(f64),
    #[error("c_eta must be positive, got {0}")]
    InvalidCEta(f64),
    #[error("sample size must be at least {min} for recipe {id}, got {m}")]
    SampleTooSmall { id: CorollaryId, m: usize, min: usize },
    #[error("unknown recipe id '{0}'")]
    UnknownRecipe(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    eta1: f64,
    theta: f64,
    kappa_sq: f64,
}

impl StepSchedule {
    pub fn new(eta1: f64, theta: f64, kappa_sq: f64) -> Result<Self, ScheduleError> {
        if !(eta1.is_finite() && eta1 > 0.0) {
            return Err(ScheduleError::NonPositiveStep(eta1));
        }
        if !(0.0..1.0).contains(&theta) {
            return Err(ScheduleError::InvalidTheta(theta));
        }
        if !(kappa_sq.is_finite() && kappa_sq >= 1e-12) {
            return Err(ScheduleError::InvalidKappa(kappa_sq));
        }
        Ok(StepSchedule {
            eta1,
            theta,
            kappa_sq,
        })
    }

    /// Constant step `η₁ κ⁻²`.
    pub fn constant(eta1: f64, kappa_sq: f64) -> Result<Self, ScheduleError> {
        Self::new(eta1, 0.0, kappa_sq)
    }

    pub fn eta1(&self) -> f64 {
        self.eta1
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn kappa_sq(&self) -> f64 {
        self.kappa_sq
    }

    /// Same law with a different normalization constant.
    pub fn with_kappa_sq(&self, kappa_sq: f64) -> Result<Self, ScheduleError> {
        Self::new(self.eta1, self.theta, kappa_sq)
    }

    /// `η_t` for `t ≥ 1`.
    #[inline]
    pub fn eta(&self, t: usize) -> f64 {
        debug_assert!(t >= 1, "step sizes are indexed from 1");
        let base = self.eta1 / self.kappa_sq;
        if self.theta == 0.0 {
            base
        } else {
            base * (t.max(1) as f64).powf(-self.theta)
        }
    }

    /// `Σ_{j=lo}^{hi} η_j` (zero for an empty range).
    pub fn sum(&self, lo: usize, hi: usize) -> f64 {
        if self.theta == 0.0 {
            return if lo > hi {
                0.0
            } else {
                (hi - lo + 1) as f64 * self.eta(1)
            };
        }
        sum_range(lo, hi, |j| self.eta(j))
    }

    /// Advisory comparison of `η₁` with `1 / (8 (ln T + 1))`.
    pub fn validate(&self, iterations: usize) -> ScheduleCheck {
        let threshold = 1.0 / (8.0 * ((iterations.max(1) as f64).ln() + 1.0));
        ScheduleCheck {
            iterations,
            eta1: self.eta1,
            threshold,
            ratio: self.eta1 / threshold,
        }
    }
}

pub fn make_schedule(eta1: f64, theta: f64, kappa_sq: f64) -> Result<StepSchedule, ScheduleError> {
    StepSchedule::new(eta1, theta, kappa_sq)
}

pub fn validate_schedule(schedule: &StepSchedule, iterations: usize) -> ScheduleCheck {
    schedule.validate(iterations)
}

/// Outcome of [`StepSchedule::validate`]. Never rejects; a ratio above one is
/// a warning.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScheduleCheck {
    pub iterations: usize,
    pub eta1: f64,
    pub threshold: f64,
    pub ratio: f64,
}

impl ScheduleCheck {
    pub fn is_ok(&self) -> bool {
        self.eta1 <= self.threshold
    }
}

impl fmt::Display for ScheduleCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            write!(f, "ok: eta1 = {} <= {:.6}", self.eta1, self.threshold)
        } else {
            write!(
                f,
                "warning: eta1 = {} exceeds 1/(8(ln T + 1)) = {:.6} for T = {} (ratio {:.4})",
                self.eta1, self.threshold, self.iterations, self.ratio
            )
        }
    }
}

/// Number of passes `⌈b t / m⌉` after `t` iterations.
pub fn passes(b: usize, t: usize, m: usize) -> usize {
    assert!(m >= 1, "sample size must be positive");
    (b * t).div_ceil(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CorollaryId {
    C3,
    C4,
    C5,
    C6,
    C7,
    #[serde(rename = "BGM")]
    Bgm,
    C11,
    C12,
    B1,
    B2,
    B3,
}

impl CorollaryId {
    pub const ALL: [CorollaryId; 11] = [
        CorollaryId::C3,
        CorollaryId::C4,
        CorollaryId::C5,
        CorollaryId::C6,
        CorollaryId::C7,
        CorollaryId::Bgm,
        CorollaryId::C11,
        CorollaryId::C12,
        CorollaryId::B1,
        CorollaryId::B2,
        CorollaryId::B3,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CorollaryId::C3 => "C3",
            CorollaryId::C4 => "C4",
            CorollaryId::C5 => "C5",
            CorollaryId::C6 => "C6",
            CorollaryId::C7 => "C7",
            CorollaryId::Bgm => "BGM",
            CorollaryId::C11 => "C11",
            CorollaryId::C12 => "C12",
            CorollaryId::B1 => "B1",
            CorollaryId::B2 => "B2",
            CorollaryId::B3 => "B3",
        }
    }
}

impl fmt::Display for CorollaryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CorollaryId {
    type Err = ScheduleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CorollaryId::ALL
            .into_iter()
            .find(|id| id.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| ScheduleError::UnknownRecipe(s.to_string()))
    }
}

/// Which side of the regularity / capacity thresholds a recipe was built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Regime {
    /// `ζ ≥ 1/2`.
    pub attainable: bool,
    /// `2ζ + γ > 1`.
    pub fast: bool,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}, 2zeta+gamma{}1",
            if self.attainable { "attainable" } else { "non-attainable" },
            if self.fast { ">" } else { "<=" }
        )
    }
}

impl Serialize for Regime {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Inputs to [`recipe`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecipeParams {
    pub m: usize,
    pub zeta: f64,
    pub gamma: f64,
    pub epsilon: Option<f64>,
    pub c_eta: f64,
    pub kappa_sq: f64,
}

impl RecipeParams {
    /// `ζ = 1/2`, `γ = 1`, `c_η = 1/8`, `κ² = 1`.
    pub fn new(m: usize) -> Self {
        RecipeParams {
            m,
            zeta: 0.5,
            gamma: 1.0,
            epsilon: None,
            c_eta: DEFAULT_C_ETA,
            kappa_sq: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Recipe {
    pub corollary: CorollaryId,
    pub b: usize,
    pub eta1: f64,
    pub theta: f64,
    pub t_star: usize,
    pub passes: usize,
    pub regime: Regime,
    #[serde(skip)]
    pub m: usize,
    #[serde(skip)]
    kappa_sq: f64,
}

impl Recipe {
    pub fn schedule(&self) -> StepSchedule {
        StepSchedule::new(self.eta1, self.theta, self.kappa_sq)
            .expect("recipe parameters are validated on construction")
    }

    /// Batch GM for `BGM`, mini-batch SGM otherwise.
    pub fn algorithm(&self) -> Algorithm {
        match self.corollary {
            CorollaryId::Bgm => Algorithm::Batch,
            _ => Algorithm::Sgm { batch: self.b },
        }
    }
}

/// Builds the `(b, η, T*)` choice of one corollary.
///
/// Attainable-case recipes (`C3`–`C7`) and their non-attainable counterparts
/// (`C11`, `C12`, `B1`–`B3`) share formulas when `2ζ + γ > 1`; when
/// `2ζ + γ ≤ 1` every recipe uses its `ε` branch and fails without `ε`.
pub fn recipe(id: CorollaryId, params: &RecipeParams) -> Result<Recipe, ScheduleError> {
    let RecipeParams {
        m,
        zeta,
        gamma,
        epsilon,
        c_eta,
        kappa_sq,
    } = *params;
    if !(zeta.is_finite() && zeta > 0.0) {
        return Err(ScheduleError::InvalidZeta(zeta));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(ScheduleError::InvalidGamma(gamma));
    }
    if !(c_eta.is_finite() && c_eta > 0.0) {
        return Err(ScheduleError::InvalidCEta(c_eta));
    }
    let s = 2.0 * zeta + gamma;
    let fast = s > 1.0;
    let eps = if fast {
        None
    } else {
        let e = epsilon.ok_or(ScheduleError::RegimeRequiresEpsilon(s))?;
        if !(e > 0.0 && e < 1.0) {
            return Err(ScheduleError::InvalidEpsilon(e));
        }
        Some(e)
    };
    use CorollaryId::*;
    let uses_log = matches!(id, C6 | C7 | B2 | B3);
    let min_m = if uses_log { 2 } else { 1 };
    if m < min_m {
        return Err(ScheduleError::SampleTooSmall { id, m, min: min_m });
    }
    let mf = m as f64;
    let pow = |e: f64| mf.powf(e);
    // Exponent of T* in each family; the ε branch applies when 2ζ + γ ≤ 1.
    let t_exp = match (id, eps) {
        (C3 | C11, None) => (s + 1.0) / s,
        (C3 | C11, Some(e)) => 2.0 - e,
        (C4 | C12, None) => 1.0 / s + 0.5,
        (C4 | C12, Some(e)) => 1.5 - e,
        (C5 | B1, None) => (2.0 * zeta + 1.0) / s,
        (C5 | B1, Some(e)) => 1.0 + 2.0 * zeta - e,
        (C6 | C7 | Bgm | B2 | B3, None) => 1.0 / s,
        (C6 | C7 | Bgm | B2 | B3, Some(e)) => 1.0 - e,
    };
    let b = match id {
        C3 | C5 | C11 | B1 | Bgm => 1,
        C4 | C12 => guarded_ceil(mf.sqrt()),
        C6 | B2 => guarded_ceil(pow(2.0 * zeta / s.max(1.0))),
        C7 | B3 => m,
    };
    let b = if id == Bgm { m } else { b.min(m) };
    let rate = match id {
        C3 | C11 => 1.0 / mf,
        C4 | C12 => 1.0 / mf.sqrt(),
        C5 | B1 => pow(-2.0 * zeta / s.max(1.0)),
        C6 | C7 | B2 | B3 => 1.0 / mf.ln(),
        Bgm => 1.0,
    };
    let eta1 = c_eta * rate;
    let schedule = StepSchedule::new(eta1, 0.0, kappa_sq)?;
    let t_star = guarded_ceil(pow(t_exp));
    Ok(Recipe {
        corollary: id,
        b,
        eta1: schedule.eta1(),
        theta: 0.0,
        t_star,
        passes: passes(b, t_star, m),
        regime: Regime {
            attainable: zeta >= 0.5,
            fast,
        },
        m,
        kappa_sq,
    })
}

/// Every recipe that can be built for `params`, plus the ones that cannot and
/// why.
pub fn recipe_table(params: &RecipeParams) -> (Vec<Recipe>, Vec<(CorollaryId, ScheduleError)>) {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for id in CorollaryId::ALL {
        match recipe(id, params) {
            Ok(r) => ok.push(r),
            Err(e) => failed.push((id, e)),
        }
    }
    (ok, failed)
}
