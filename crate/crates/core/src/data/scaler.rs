use serde::{Deserialize, Serialize};

use super::RunToFailureSeries;
use crate::error::{Error, Result};

/// Per-channel min/max fitted on training series only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Channels with `max == min`; these scale to 0.
    pub constant: Vec<bool>,
    /// Unit ids the parameters were fitted on.
    pub fitted_on: Vec<u32>,
}

/// Fits min-max parameters over every row of every training series.
pub fn fit_minmax(
    train: &[RunToFailureSeries],
    include_op_conditions: bool,
) -> Result<ScalerParams> {
    let first = train
        .iter()
        .find(|s| !s.is_empty())
        .ok_or_else(|| Error::Contract("fit_minmax needs at least one non-empty series".into()))?;
    let c = first.channel_count(include_op_conditions);
    let mut min = vec![f64::INFINITY; c];
    let mut max = vec![f64::NEG_INFINITY; c];
    for s in train {
        if s.channel_count(include_op_conditions) != c && !s.is_empty() {
            return Err(Error::Format(format!(
                "unit {} has {} channels, expected {c}",
                s.unit_id,
                s.channel_count(include_op_conditions)
            )));
        }
        for t in 0..s.len() {
            for (j, v) in s
                .channels_at(t, include_op_conditions)
                .into_iter()
                .enumerate()
            {
                if !v.is_finite() {
                    return Err(Error::Format(format!(
                        "unit {} interval {t} channel {j} is not finite",
                        s.unit_id
                    )));
                }
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
    }
    let constant = min.iter().zip(&max).map(|(a, b)| a == b).collect();
    let mut fitted_on: Vec<u32> = train.iter().map(|s| s.unit_id).collect();
    fitted_on.sort_unstable();
    Ok(ScalerParams {
        min,
        max,
        constant,
        fitted_on,
    })
}

impl ScalerParams {
    pub fn channels(&self) -> usize {
        self.min.len()
    }

    /// `(x − min) / (max − min)`, unclipped; constant channels map to 0.
    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &x)| {
                if self.constant[j] {
                    0.0
                } else {
                    (x - self.min[j]) / (self.max[j] - self.min[j])
                }
            })
            .collect()
    }

    /// Inverse of [`ScalerParams::apply`] on non-constant channels; constant ones return their fitted value.
    pub fn invert(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &y)| {
                if self.constant[j] {
                    self.min[j]
                } else {
                    y * (self.max[j] - self.min[j]) + self.min[j]
                }
            })
            .collect()
    }
}
