//! Early stopping over a checkpointed trajectory.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{misclassification_of_values, DataError, Sample};
use crate::exec::Execution;
use crate::iterations::Trajectory;
use crate::numeric::mean_sq_diff;
use crate::spaces::{PointEvaluator, SpaceError};

#[derive(Debug, Error)]
pub enum StoppingError {
    #[error("validation sample is empty")]
    EmptyValidation,
    #[error("trajectory has no checkpoints")]
    EmptyTrajectory,
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopRule {
    HoldoutArgmin,
    TheoreticalTstar,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValidationMetric {
    #[default]
    Mse,
    Misclassification,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingOutcome {
    pub rule: StopRule,
    /// Chosen checkpoint `t̂`.
    pub checkpoint: usize,
    /// Position of `t̂` in the trajectory.
    pub index: usize,
    pub checkpoints: Vec<usize>,
    /// Validation errors aligned with `checkpoints` (empty for the
    /// theoretical rule when no validation set is used).
    pub curve: Vec<f64>,
    pub metric: Option<ValidationMetric>,
}

/// Index of the smallest value, first occurrence on ties. NaN never wins.
pub fn argmin_first<I: IntoIterator<Item = f64>>(values: I) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        match best {
            None if !v.is_nan() => best = Some((i, v)),
            Some((_, b)) if v < b => best = Some((i, v)),
            _ => {}
        }
    }
    best.map(|(i, _)| i)
}

/// Validation error of every checkpoint of `trajectory`.
pub fn validation_curve(
    trajectory: &Trajectory,
    validation: &Sample,
    metric: ValidationMetric,
    exec: Execution,
) -> Result<Vec<f64>, StoppingError> {
    let first = trajectory.iterates().first().ok_or(StoppingError::EmptyTrajectory)?;
    if validation.is_empty() {
        return Err(StoppingError::EmptyValidation);
    }
    let eval = PointEvaluator::new(first, validation.points(), exec)?;
    trajectory
        .iterates()
        .iter()
        .map(|h| {
            let values = eval.values(h)?;
            Ok(match metric {
                ValidationMetric::Mse => mean_sq_diff(&values, validation.targets()),
                ValidationMetric::Misclassification => {
                    misclassification_of_values(&values, validation.targets())?
                }
            })
        })
        .collect()
}

/// Picks the checkpoint with the smallest validation error.
pub fn holdout_stop(
    trajectory: &Trajectory,
    validation: &Sample,
    metric: ValidationMetric,
    exec: Execution,
) -> Result<StoppingOutcome, StoppingError> {
    let curve = validation_curve(trajectory, validation, metric, exec)?;
    let mut outcome = stop_on_curve(trajectory.checkpoints(), curve)?;
    outcome.metric = Some(metric);
    Ok(outcome)
}

/// Hold-out argmin over a precomputed curve.
pub fn stop_on_curve(checkpoints: &[usize], curve: Vec<f64>) -> Result<StoppingOutcome, StoppingError> {
    assert_eq!(checkpoints.len(), curve.len(), "one error per checkpoint");
    let index = argmin_first(curve.iter().copied()).ok_or(StoppingError::EmptyTrajectory)?;
    Ok(StoppingOutcome {
        rule: StopRule::HoldoutArgmin,
        checkpoint: checkpoints[index],
        index,
        checkpoints: checkpoints.to_vec(),
        curve,
        metric: None,
    })
}

/// The last checkpoint not beyond `t_star` (the first checkpoint if all are).
pub fn theoretical_stop(trajectory: &Trajectory, t_star: usize) -> Result<StoppingOutcome, StoppingError> {
    let cps = trajectory.checkpoints();
    if cps.is_empty() {
        return Err(StoppingError::EmptyTrajectory);
    }
    let index = cps.partition_point(|&t| t <= t_star).saturating_sub(1);
    Ok(StoppingOutcome {
        rule: StopRule::TheoreticalTstar,
        checkpoint: cps[index],
        index,
        checkpoints: cps.to_vec(),
        curve: Vec::new(),
        metric: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmin_examples() {
        let o = stop_on_curve(&[10, 20, 30], vec![0.5, 0.3, 0.4]).unwrap();
        assert_eq!(o.checkpoint, 20);
        let o = stop_on_curve(&[1, 2, 3], vec![0.5, 0.4, 0.1]).unwrap();
        assert_eq!(o.checkpoint, 3);
        let o = stop_on_curve(&[5, 6], vec![0.3, 0.3]).unwrap();
        assert_eq!(o.checkpoint, 5);
        assert_eq!(argmin_first([f64::NAN, 2.0, 1.0]), Some(2));
        assert_eq!(argmin_first(Vec::<f64>::new()), None);
    }
}
