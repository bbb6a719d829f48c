//! From run-to-failure series to labelled model inputs.
//!
//! `scale → window → augment with statistics → split encoder/decoder rows`.

mod io;
mod scaler;
mod split;
mod window;

pub use io::{read_dataset_csv, read_json, read_window_csv, write_dataset_csv, write_json};
pub use scaler::{fit_minmax, ScalerParams};
pub use split::train_test_split;
pub use window::{slide_windows, stat_features, successor_regression, RawWindow};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SlatConfig;
use crate::tensor::Tensor;

/// Rows appended to each window: channel means, successor slope `a`, and intercept `b`.
pub const STAT_ROWS: usize = 3;

/// One unit's trajectory, from its first inspection up to (possibly before) failure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunToFailureSeries {
    pub unit_id: u32,
    /// Operating-condition descriptors, constant over the unit's life.
    pub op_conditions: Vec<f64>,
    /// `L` rows of sensor readings, one per inspection interval.
    pub sensors: Vec<Vec<f64>>,
    /// Interval index at which the unit fails. Equals `L − 1` for complete
    /// series and lies beyond the last row for truncated ones.
    pub failure_index: usize,
}

impl RunToFailureSeries {
    pub fn len(&self) -> usize {
        self.sensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensors.is_empty()
    }

    pub fn sensor_count(&self) -> usize {
        self.sensors.first().map_or(0, Vec::len)
    }

    pub fn is_complete(&self) -> bool {
        self.failure_index + 1 == self.len()
    }

    /// Remaining intervals until failure at interval `t` (uncapped).
    pub fn remaining_at(&self, t: usize) -> usize {
        self.failure_index.saturating_sub(t)
    }

    /// Row `t` as model channels: sensors, then (optionally) operating conditions.
    pub fn channels_at(&self, t: usize, include_op_conditions: bool) -> Vec<f64> {
        let mut row = self.sensors[t].clone();
        if include_op_conditions {
            row.extend_from_slice(&self.op_conditions);
        }
        row
    }

    pub fn channel_count(&self, include_op_conditions: bool) -> usize {
        self.sensor_count()
            + if include_op_conditions {
                self.op_conditions.len()
            } else {
                0
            }
    }

    /// Keeps the first `len` intervals; the failure index, and thus the true RUL, is retained.
    pub fn truncated(&self, len: usize) -> Self {
        Self {
            unit_id: self.unit_id,
            op_conditions: self.op_conditions.clone(),
            sensors: self.sensors[..len.min(self.len())].to_vec(),
            failure_index: self.failure_index,
        }
    }
}

/// Preprocessing parameters shared by training and inference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub window: usize,
    pub decoder_steps: usize,
    pub rul_max: f64,
    pub include_op_conditions: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::from_model(&SlatConfig::default())
    }
}

impl PipelineConfig {
    pub fn from_model(cfg: &SlatConfig) -> Self {
        Self {
            window: cfg.window,
            decoder_steps: cfg.decoder_steps,
            rul_max: cfg.rul_max,
            include_op_conditions: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::Config("window must be at least 2".into()));
        }
        if self.decoder_steps == 0 || self.decoder_steps > self.window {
            return Err(Error::Config(format!(
                "decoder_steps {} must be in 1..={}",
                self.decoder_steps, self.window
            )));
        }
        Ok(())
    }
}

/// One supervised example.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSample {
    pub unit_id: u32,
    /// Interval index of the window's last row.
    pub window_end: usize,
    /// `(T_w + 3) × d_k`: scaled window followed by the statistical rows.
    pub encoder: Tensor,
    /// `M × d_k`: the last `M` scaled window rows.
    pub decoder: Tensor,
    /// `min(remaining intervals, rul_max)`.
    pub label: f64,
}

/// A series that was too short to produce a window.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedSeries {
    pub unit_id: u32,
    pub len: usize,
    pub window: usize,
}

#[derive(Clone, Debug, Default)]
pub struct SampleSet {
    pub samples: Vec<WindowSample>,
    pub skipped: Vec<SkippedSeries>,
}

impl SampleSet {
    pub fn labels(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.label).collect()
    }
}

/// Scales one series into a `L × d_k` matrix.
pub fn scale_series(
    series: &RunToFailureSeries,
    scaler: &ScalerParams,
    include_op_conditions: bool,
) -> Result<Tensor> {
    let c = series.channel_count(include_op_conditions);
    if c != scaler.channels() {
        return Err(Error::Format(format!(
            "unit {} has {c} channels, scaler was fitted on {}",
            series.unit_id,
            scaler.channels()
        )));
    }
    let mut data = Vec::with_capacity(series.len() * c);
    for t in 0..series.len() {
        data.extend(scaler.apply(&series.channels_at(t, include_op_conditions)));
    }
    Tensor::matrix(series.len(), c, data)
}

fn sample_from_window(unit_id: u32, w: &RawWindow, cfg: &PipelineConfig) -> Result<WindowSample> {
    let encoder = stat_features(&w.rows)?;
    let decoder = w
        .rows
        .slice_rows(cfg.window - cfg.decoder_steps, cfg.decoder_steps)?;
    Ok(WindowSample {
        unit_id,
        window_end: w.end,
        encoder,
        decoder,
        label: w.label,
    })
}

/// Every stride-1 window of every series, ordered by `(unit_id, window start)`.
pub fn build_samples(
    series: &[RunToFailureSeries],
    scaler: &ScalerParams,
    cfg: &PipelineConfig,
) -> Result<SampleSet> {
    cfg.validate()?;
    let mut out = SampleSet::default();
    let mut order: Vec<&RunToFailureSeries> = series.iter().collect();
    order.sort_by_key(|s| s.unit_id);
    for s in order {
        if s.len() < cfg.window {
            out.skipped.push(SkippedSeries {
                unit_id: s.unit_id,
                len: s.len(),
                window: cfg.window,
            });
            continue;
        }
        let scaled = scale_series(s, scaler, cfg.include_op_conditions)?;
        for w in slide_windows(&scaled, s.failure_index, cfg.window, cfg.rul_max)? {
            out.samples.push(sample_from_window(s.unit_id, &w, cfg)?);
        }
    }
    Ok(out)
}

/// The last window of each series (the evaluation point for truncated test units).
pub fn final_window_samples(
    series: &[RunToFailureSeries],
    scaler: &ScalerParams,
    cfg: &PipelineConfig,
) -> Result<SampleSet> {
    cfg.validate()?;
    let mut out = SampleSet::default();
    let mut order: Vec<&RunToFailureSeries> = series.iter().collect();
    order.sort_by_key(|s| s.unit_id);
    for s in order {
        if s.len() < cfg.window {
            out.skipped.push(SkippedSeries {
                unit_id: s.unit_id,
                len: s.len(),
                window: cfg.window,
            });
            continue;
        }
        let start = s.len() - cfg.window;
        let scaled = scale_series(s, scaler, cfg.include_op_conditions)?;
        let rows = scaled.slice_rows(start, cfg.window)?;
        let end = s.len() - 1;
        let w = RawWindow {
            start,
            end,
            label: (s.remaining_at(end) as f64).min(cfg.rul_max),
            rows,
        };
        out.samples.push(sample_from_window(s.unit_id, &w, cfg)?);
    }
    Ok(out)
}

/// Builds the single sample for the most recent `window` rows of a series (inference input).
pub fn latest_window_sample(
    series: &RunToFailureSeries,
    scaler: &ScalerParams,
    cfg: &PipelineConfig,
) -> Result<WindowSample> {
    final_window_samples(std::slice::from_ref(series), scaler, cfg)?
        .samples
        .pop()
        .ok_or_else(|| {
            Error::Contract(format!(
                "series of length {} is shorter than the window {}",
                series.len(),
                cfg.window
            ))
        })
}
