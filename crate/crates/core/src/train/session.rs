use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{ci_scoring, default_ci_widths, rmse, CiCurve};
use super::trainer::{train, TrainHistory};
use super::TrainConfig;
use crate::data::{
    build_samples, final_window_samples, fit_minmax, latest_window_sample, read_json, write_json,
    PipelineConfig, RunToFailureSeries, ScalerParams, SkippedSeries,
};
use crate::error::{Error, Result};
use crate::model::{load_checkpoint, save_checkpoint, InputDims, SlatConfig, SlatModel};

pub const MODEL_FILE: &str = "model.ckpt";
pub const PREPROCESS_FILE: &str = "preprocess.json";
pub const HISTORY_FILE: &str = "history.json";

/// Everything needed to turn raw series into model inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub scaler: ScalerParams,
    pub pipeline: PipelineConfig,
}

#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub model: SlatModel,
    pub prep: Preprocessing,
    pub history: TrainHistory,
}

/// Per-unit evaluation on final windows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub rmse: f64,
    pub unit_ids: Vec<u32>,
    pub predictions: Vec<f64>,
    pub labels: Vec<f64>,
    pub ci: CiCurve,
    pub skipped: Vec<SkippedSeries>,
    pub test_seconds: f64,
}

/// One row of a run-to-failure trajectory table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RtfRow {
    pub interval: usize,
    pub true_rul: f64,
    pub predicted_rul: f64,
    pub lower: f64,
    pub upper: f64,
    pub band_half_width: f64,
}

/// Splits units into (fit, validation); `round(n · fraction)` units, at least
/// one when `fraction > 0` and two or more units are present.
pub fn split_validation(
    series: &[RunToFailureSeries],
    fraction: f64,
    seed: u64,
) -> (Vec<RunToFailureSeries>, Vec<RunToFailureSeries>) {
    let n = series.len();
    let n_val = if fraction > 0.0 && n >= 2 {
        ((n as f64 * fraction).round() as usize).clamp(1, n - 1)
    } else {
        0
    };
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // A separate stream keeps the split independent of the epoch shuffles.
    rng.set_stream(1);
    order.shuffle(&mut rng);
    let mut is_val = vec![false; n];
    for &i in &order[..n_val] {
        is_val[i] = true;
    }
    let (mut fit, mut val) = (Vec::new(), Vec::new());
    for (s, v) in series.iter().zip(is_val) {
        if v {
            val.push(s.clone());
        } else {
            fit.push(s.clone());
        }
    }
    (fit, val)
}

/// Holds out validation units, fits the scaler on the rest, builds windows
/// and trains a freshly initialized model (`seed` drives all randomness).
pub fn fit(
    model_cfg: &SlatConfig,
    train_series: &[RunToFailureSeries],
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    cfg.validate()?;
    model_cfg.validate()?;
    if train_series.is_empty() {
        return Err(Error::Contract("no training units".into()));
    }
    let (fit_units, val_units) = split_validation(train_series, cfg.validation_fraction, cfg.seed);
    let pipeline = PipelineConfig {
        include_op_conditions: cfg.include_op_conditions,
        ..PipelineConfig::from_model(model_cfg)
    };
    let scaler = fit_minmax(&fit_units, pipeline.include_op_conditions)?;
    let train_set = build_samples(&fit_units, &scaler, &pipeline)?;
    let val_set = build_samples(&val_units, &scaler, &pipeline)?;
    if train_set.samples.is_empty() {
        return Err(Error::Contract(format!(
            "no training unit is at least {} intervals long",
            pipeline.window
        )));
    }
    let dims = InputDims::for_window(pipeline.window, scaler.channels());
    let mut model = SlatModel::init_parameters(model_cfg.clone(), dims, cfg.seed)?;
    let history = train(&mut model, &train_set.samples, &val_set.samples, cfg)?;
    Ok(TrainedModel {
        model,
        prep: Preprocessing { scaler, pipeline },
        history,
    })
}

impl TrainedModel {
    /// RMSE and CI curve over the final window of each series.
    pub fn evaluate(&self, test: &[RunToFailureSeries]) -> Result<Evaluation> {
        let start = Instant::now();
        let set = final_window_samples(test, &self.prep.scaler, &self.prep.pipeline)?;
        if set.samples.is_empty() {
            return Err(Error::Contract("no test unit holds a full window".into()));
        }
        let predictions = self.model.predict_all(&set.samples)?;
        let labels = set.labels();
        let test_seconds = start.elapsed().as_secs_f64();
        Ok(Evaluation {
            rmse: rmse(&predictions, &labels)?,
            ci: ci_scoring(
                &predictions,
                &labels,
                self.prep.pipeline.rul_max,
                &default_ci_widths(),
            )?,
            unit_ids: set.samples.iter().map(|s| s.unit_id).collect(),
            predictions,
            labels,
            skipped: set.skipped,
            test_seconds,
        })
    }

    /// Prediction from the most recent window of `series`.
    pub fn predict_latest(&self, series: &RunToFailureSeries) -> Result<f64> {
        let s = latest_window_sample(series, &self.prep.scaler, &self.prep.pipeline)?;
        self.model.predict(&s)
    }

    /// Prediction at every window end of `series`, with the ±0.1·rul_max band around the truth.
    pub fn export_rtf(&self, series: &RunToFailureSeries) -> Result<Vec<RtfRow>> {
        let cfg = &self.prep.pipeline;
        if series.len() < cfg.window {
            return Err(Error::Contract(format!(
                "unit {} has {} intervals, fewer than the window {}",
                series.unit_id,
                series.len(),
                cfg.window
            )));
        }
        let set = build_samples(std::slice::from_ref(series), &self.prep.scaler, cfg)?;
        let half = 0.1 * cfg.rul_max;
        set.samples
            .iter()
            .map(|s| {
                Ok(RtfRow {
                    interval: s.window_end,
                    true_rul: s.label,
                    predicted_rul: self.model.predict(s)?,
                    lower: s.label - half,
                    upper: s.label + half,
                    band_half_width: half,
                })
            })
            .collect()
    }

    /// Writes the checkpoint, preprocessing parameters and history into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        save_checkpoint(&self.model, dir.join(MODEL_FILE))?;
        write_json(dir.join(PREPROCESS_FILE), &self.prep)?;
        write_json(dir.join(HISTORY_FILE), &self.history)
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let model = load_checkpoint(dir.join(MODEL_FILE))?;
        let prep: Preprocessing = read_json(dir.join(PREPROCESS_FILE))?;
        let history = read_json(dir.join(HISTORY_FILE))?;
        if prep.scaler.channels() != model.dims().channels
            || prep.pipeline.window != model.config().window
        {
            return Err(Error::Format(
                "preprocessing parameters do not match the checkpoint".into(),
            ));
        }
        Ok(Self {
            model,
            prep,
            history,
        })
    }
}

pub fn write_rtf_csv(path: impl AsRef<Path>, rows: &[RtfRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rtf_csv(path: impl AsRef<Path>) -> Result<Vec<RtfRow>> {
    let mut r = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    r.deserialize().map(|row| Ok(row?)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub run: usize,
    pub seed: u64,
    pub rmse: f64,
    pub best_epoch: usize,
    pub train_seconds: f64,
    pub test_seconds: f64,
}

/// Aggregate over runs. `rmse_std` is the sample standard deviation (0 for one run).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub runs: Vec<RunMetrics>,
    pub rmse_mean: f64,
    pub rmse_std: f64,
    /// Run-averaged CI curve.
    pub ci: CiCurve,
    pub train_seconds_mean: f64,
    pub test_seconds_mean: f64,
}

impl MetricsReport {
    pub fn from_runs(runs: Vec<RunMetrics>, curves: &[CiCurve]) -> Result<Self> {
        if runs.is_empty() || runs.len() != curves.len() {
            return Err(Error::Contract("a report needs one curve per run".into()));
        }
        let n = runs.len() as f64;
        let mean = |f: fn(&RunMetrics) -> f64| runs.iter().map(f).sum::<f64>() / n;
        let rmse_mean = mean(|r| r.rmse);
        let rmse_std = if runs.len() > 1 {
            (runs
                .iter()
                .map(|r| (r.rmse - rmse_mean).powi(2))
                .sum::<f64>()
                / (n - 1.0))
                .sqrt()
        } else {
            0.0
        };
        let widths = curves[0].widths.clone();
        let values = (0..widths.len())
            .map(|i| curves.iter().map(|c| c.values[i]).sum::<f64>() / n)
            .collect();
        Ok(Self {
            rmse_mean,
            rmse_std,
            ci: CiCurve { widths, values },
            train_seconds_mean: mean(|r| r.train_seconds),
            test_seconds_mean: mean(|r| r.test_seconds),
            runs,
        })
    }

    pub fn single(
        run: usize,
        seed: u64,
        trained: &TrainedModel,
        eval: &Evaluation,
    ) -> Result<Self> {
        Self::from_runs(
            vec![RunMetrics {
                run,
                seed,
                rmse: eval.rmse,
                best_epoch: trained.history.best_epoch,
                train_seconds: trained.history.train_seconds,
                test_seconds: eval.test_seconds,
            }],
            std::slice::from_ref(&eval.ci),
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path)
    }
}

/// `cfg.runs` independent fits with seeds `cfg.seed + i`, run on up to
/// `threads` worker threads. Results do not depend on the thread count.
pub fn multi_run(
    model_cfg: &SlatConfig,
    train_series: &[RunToFailureSeries],
    test_series: &[RunToFailureSeries],
    cfg: &TrainConfig,
    threads: usize,
) -> Result<(MetricsReport, Vec<TrainedModel>)> {
    cfg.validate()?;
    let threads = threads.clamp(1, cfg.runs);
    let run_one = |i: usize| -> Result<(RunMetrics, CiCurve, TrainedModel)> {
        let seed = cfg.seed.wrapping_add(i as u64);
        let run_cfg = TrainConfig {
            seed,
            ..cfg.clone()
        };
        let trained = fit(model_cfg, train_series, &run_cfg)?;
        let eval = trained.evaluate(test_series)?;
        let metrics = RunMetrics {
            run: i,
            seed,
            rmse: eval.rmse,
            best_epoch: trained.history.best_epoch,
            train_seconds: trained.history.train_seconds,
            test_seconds: eval.test_seconds,
        };
        Ok((metrics, eval.ci, trained))
    };
    let mut results: Vec<Option<Result<(RunMetrics, CiCurve, TrainedModel)>>> =
        (0..cfg.runs).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                let run_one = &run_one;
                scope.spawn(move || {
                    (w..cfg.runs)
                        .step_by(threads)
                        .map(|i| (i, run_one(i)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("training thread panicked") {
                results[i] = Some(r);
            }
        }
    });
    let mut runs = Vec::with_capacity(cfg.runs);
    let mut curves = Vec::with_capacity(cfg.runs);
    let mut models = Vec::with_capacity(cfg.runs);
    for r in results {
        let (m, c, t) = r.expect("every run was scheduled")?;
        runs.push(m);
        curves.push(c);
        models.push(t);
    }
    Ok((MetricsReport::from_runs(runs, &curves)?, models))
}
