//! Brute-force checks of the deterministic summation and spectral contraction
//! estimates used by the analysis.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{product_range, sum_range};
use crate::schedules::StepSchedule;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LemmaError {
    #[error("convolution bound requires t >= 3, got {0}")]
    ConvolutionRange(usize),
    #[error("sum bounds require t >= 1")]
    ZeroT,
    #[error("theta must be finite, got {0}")]
    ThetaRange(f64),
    #[error("step-size precondition violated: eta_1 * max eigenvalue = {0} > 1")]
    StepTooLarge(f64),
    #[error("contraction bound requires 0 <= k <= t - 1 (k = {k}, t = {t})")]
    IndexRange { k: usize, t: usize },
    #[error("eigenvalues must be finite and nonnegative")]
    InvalidEigenvalue,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LemmaId {
    /// `t^{1−θ}/2 ≤ Σ_{k≤t} k^{−θ}`.
    SumLower,
    /// `Σ_{k≤t} k^{−θ} ≤ t^{1−θ}/(1−θ)`.
    SumUpper,
    /// `Σ_{k≤t} k^{−θ} ≤ t^{max(1−θ,0)} (1 + ln t)`.
    SumLog,
    /// `Σ_{k<t} k^{−q}/(t−k) ≤ 2 t^{−min(q,1)} (1 + ln t)`.
    Convolution,
    /// `max_σ Π_{l=k+1}^t (1 − η_l σ) σ^ζ ≤ (ζ / (e Σ_{j=k+1}^t η_j))^ζ`.
    Contraction,
}

impl LemmaId {
    pub fn as_str(&self) -> &'static str {
        match self {
            LemmaId::SumLower => "sum-lower",
            LemmaId::SumUpper => "sum-upper",
            LemmaId::SumLog => "sum-log",
            LemmaId::Convolution => "convolution",
            LemmaId::Contraction => "contraction",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaVerdict {
    pub lemma: LemmaId,
    pub params: String,
    pub lhs: f64,
    pub bound: f64,
    pub slack: f64,
    pub pass: bool,
}

impl LemmaVerdict {
    /// Verdict for an upper bound `lhs ≤ bound`.
    fn upper(lemma: LemmaId, params: String, lhs: f64, bound: f64) -> Self {
        let slack = bound - lhs;
        LemmaVerdict {
            lemma,
            params,
            lhs,
            bound,
            slack,
            pass: slack >= -1e-12 * bound.abs().max(1.0),
        }
    }
}

fn power_sum(theta: f64, t: usize) -> f64 {
    sum_range(1, t, |k| (k as f64).powf(-theta))
}

/// Checks the lower and upper estimates of `Σ_{k=1}^t k^{−θ}` (for
/// `θ ∈ [0, 1)`) and the logarithmic upper estimate (any `θ`).
///
/// A lower bound is reported as `lhs = bound side`, `bound = sum`, so that
/// `slack ≥ 0` means the bound holds in every verdict.
pub fn check_sum_bounds(theta: f64, t: usize) -> Result<Vec<LemmaVerdict>, LemmaError> {
    if t == 0 {
        return Err(LemmaError::ZeroT);
    }
    if !theta.is_finite() {
        return Err(LemmaError::ThetaRange(theta));
    }
    let sum = power_sum(theta, t);
    let tf = t as f64;
    let mut out = Vec::with_capacity(3);
    if (0.0..1.0).contains(&theta) {
        let params = format!("theta={theta};t={t}");
        out.push(LemmaVerdict::upper(
            LemmaId::SumLower,
            params.clone(),
            tf.powf(1.0 - theta) / 2.0,
            sum,
        ));
        out.push(LemmaVerdict::upper(
            LemmaId::SumUpper,
            params,
            sum,
            tf.powf(1.0 - theta) / (1.0 - theta),
        ));
    }
    out.push(check_sum_log_bound(theta, t)?);
    Ok(out)
}

pub fn check_sum_log_bound(theta: f64, t: usize) -> Result<LemmaVerdict, LemmaError> {
    if t == 0 {
        return Err(LemmaError::ZeroT);
    }
    if !theta.is_finite() {
        return Err(LemmaError::ThetaRange(theta));
    }
    let tf = t as f64;
    Ok(LemmaVerdict::upper(
        LemmaId::SumLog,
        format!("theta={theta};t={t}"),
        power_sum(theta, t),
        tf.powf((1.0 - theta).max(0.0)) * (1.0 + tf.ln()),
    ))
}

pub fn check_convolution_bound(q: f64, t: usize) -> Result<LemmaVerdict, LemmaError> {
    if t < 3 {
        return Err(LemmaError::ConvolutionRange(t));
    }
    let tf = t as f64;
    let lhs = sum_range(1, t - 1, |k| (k as f64).powf(-q) / (t - k) as f64);
    let bound = 2.0 * tf.powf(-q.min(1.0)) * (1.0 + tf.ln());
    Ok(LemmaVerdict::upper(
        LemmaId::Convolution,
        format!("q={q};t={t}"),
        lhs,
        bound,
    ))
}

/// Spectral contraction for a diagonal operator with eigenvalues `eigs`.
/// The `σ = 0` term contributes `0` (for `ζ > 0`).
pub fn check_contraction_bound(
    eigs: &[f64],
    schedule: &StepSchedule,
    zeta: f64,
    k: usize,
    t: usize,
) -> Result<LemmaVerdict, LemmaError> {
    if t == 0 || k > t - 1 {
        return Err(LemmaError::IndexRange { k, t });
    }
    if eigs.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(LemmaError::InvalidEigenvalue);
    }
    let max_eig = eigs.iter().copied().fold(0.0, f64::max);
    let lead = schedule.eta(1) * max_eig;
    if lead > 1.0 + 1e-12 {
        return Err(LemmaError::StepTooLarge(lead));
    }
    let lhs = eigs
        .iter()
        .map(|&s| {
            if s == 0.0 {
                return 0.0;
            }
            product_range(k + 1, t, |l| 1.0 - schedule.eta(l) * s) * s.powf(zeta)
        })
        .fold(0.0, f64::max);
    let bound = (zeta / (std::f64::consts::E * schedule.sum(k + 1, t))).powf(zeta);
    Ok(LemmaVerdict::upper(
        LemmaId::Contraction,
        format!(
            "zeta={zeta};theta={};eta1={};k={k};t={t};n_eigs={}",
            schedule.theta(),
            schedule.eta1(),
            eigs.len()
        ),
        lhs,
        bound,
    ))
}

/// About `count` distinct log-spaced integers from `lo` to `hi` inclusive.
pub fn log_grid(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    let (lo_f, hi_f) = ((lo.max(1)) as f64, hi as f64);
    let mut out: Vec<usize> = Vec::new();
    for i in 0..count.max(2) {
        let frac = i as f64 / (count.max(2) - 1) as f64;
        let v = (lo_f * (hi_f / lo_f).powf(frac)).round() as usize;
        let v = v.clamp(lo, hi);
        if out.last().is_none_or(|&l| v > l) {
            out.push(v);
        }
    }
    out
}

/// Parameters of the shipped verdict sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub max_t: usize,
    pub grid_points: usize,
    pub spectra: usize,
    pub spectrum_size: usize,
    pub max_contraction_t: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            max_t: 10_000,
            grid_points: 40,
            spectra: 100,
            spectrum_size: 20,
            max_contraction_t: 200,
            seed: 2018,
        }
    }
}

pub const SWEEP_THETAS: [f64; 10] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
pub const SWEEP_QS: [f64; 5] = [-1.0, 0.0, 0.5, 1.0, 2.0];
pub const SWEEP_ZETAS: [f64; 3] = [0.5, 1.0, 2.0];
pub const SWEEP_CONTRACTION_THETAS: [f64; 2] = [0.0, 0.5];

/// Full sweep: sum bounds for `θ ∈ {0, 0.1, …, 0.9}`, the convolution bound
/// for `q ∈ {−1, 0, 0.5, 1, 2}` over log-spaced `t ≤ max_t`, and the
/// contraction bound on random spectra in `(0, 1]` with `η₁ = 1`,
/// `ζ ∈ {0.5, 1, 2}`, `θ ∈ {0, 0.5}`, log-spaced `t ≤ max_contraction_t` and
/// `k ∈ {0, t/2, t − 1}`.
pub fn lemma_sweep(config: &SweepConfig) -> Vec<LemmaVerdict> {
    let mut out = Vec::new();
    let ts = log_grid(1, config.max_t.max(1), config.grid_points);
    for &theta in &SWEEP_THETAS {
        for &t in &ts {
            out.extend(check_sum_bounds(theta, t).expect("t >= 1"));
        }
    }
    if config.max_t >= 3 {
        let ts3 = log_grid(3, config.max_t, config.grid_points);
        for &q in &SWEEP_QS {
            for &t in &ts3 {
                out.push(check_convolution_bound(q, t).expect("t >= 3"));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let contraction_ts = log_grid(1, config.max_contraction_t.max(1), 8);
    for _ in 0..config.spectra {
        // (0, 1]: 1 - U[0, 1)
        let eigs: Vec<f64> = (0..config.spectrum_size.max(1))
            .map(|_| 1.0 - rng.random::<f64>())
            .collect();
        for &theta in &SWEEP_CONTRACTION_THETAS {
            let schedule = StepSchedule::new(1.0, theta, 1.0).expect("valid schedule");
            for &t in &contraction_ts {
                let mut ks = vec![0, t / 2, t - 1];
                ks.dedup();
                for &k in &ks {
                    for &zeta in &SWEEP_ZETAS {
                        out.push(
                            check_contraction_bound(&eigs, &schedule, zeta, k, t)
                                .expect("preconditions hold"),
                        );
                    }
                }
            }
        }
    }
    out
}

/// CSV with columns `lemma, params, lhs, bound, slack, pass`.
pub fn write_verdicts_csv<W: Write>(verdicts: &[LemmaVerdict], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lemma", "params", "lhs", "bound", "slack", "pass"])?;
    for v in verdicts {
        w.write_record([
            v.lemma.as_str().to_string(),
            v.params.clone(),
            v.lhs.to_string(),
            v.bound.to_string(),
            v.slack.to_string(),
            v.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn sum_examples() {
        let v = check_sum_bounds(0.0, 5).unwrap();
        assert_eq!(v[0].bound, 5.0);
        assert_eq!(v[0].lhs, 2.5);
        assert_eq!(v[1].bound, 5.0);
        assert!(v.iter().all(|x| x.pass));

        let v = check_sum_bounds(0.5, 4).unwrap();
        assert!(close(v[1].lhs, 2.78446, 1e-5));
        assert!(close(v[0].lhs, 1.0, 1e-15));
        assert!(close(v[1].bound, 4.0, 1e-15));
        assert!(v.iter().all(|x| x.pass));

        let v = check_sum_bounds(2.0, 10).unwrap();
        assert_eq!(v.len(), 1);
        assert!(close(v[0].bound, 3.30259, 1e-5));
        assert!(close(v[0].lhs, 1.54977, 1e-5));
        assert!(v[0].pass);
    }

    #[test]
    fn convolution_examples() {
        let v = check_convolution_bound(1.0, 3).unwrap();
        assert!(close(v.lhs, 1.0, 1e-15));
        assert!(close(v.bound, 1.39907, 1e-5));
        assert!(v.pass);
        let v = check_convolution_bound(0.0, 3).unwrap();
        assert!(close(v.lhs, 1.5, 1e-15));
        assert!(close(v.bound, 4.19722, 1e-5));
        assert_eq!(check_convolution_bound(1.0, 2), Err(LemmaError::ConvolutionRange(2)));
    }

    #[test]
    fn contraction_example() {
        let s = StepSchedule::constant(0.5, 1.0).unwrap();
        let v = check_contraction_bound(&[1.0, 0.5], &s, 1.0, 0, 2).unwrap();
        assert!(close(v.lhs, 0.28125, 1e-15));
        assert!(close(v.bound, 0.36788, 1e-5));
        assert!(v.pass);
        let v = check_contraction_bound(&[0.0], &s, 1.0, 0, 2).unwrap();
        assert_eq!(v.lhs, 0.0);
        let big = StepSchedule::constant(2.0, 1.0).unwrap();
        assert!(matches!(
            check_contraction_bound(&[1.0], &big, 1.0, 0, 2),
            Err(LemmaError::StepTooLarge(_))
        ));
    }

    #[test]
    fn verdict_pass_rule() {
        let v = LemmaVerdict::upper(LemmaId::SumLog, String::new(), 1.0 + 1e-13, 1.0);
        assert!(v.pass);
        let v = LemmaVerdict::upper(LemmaId::SumLog, String::new(), 1.0 + 1e-11, 1.0);
        assert!(!v.pass);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(3, 10_000, 20);
        assert_eq!(g[0], 3);
        assert_eq!(*g.last().unwrap(), 10_000);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }
}
