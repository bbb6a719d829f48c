use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::rmse;
use super::optim::{noam_lr, Adam};
use super::TrainConfig;
use crate::data::WindowSample;
use crate::error::{Error, Result};
use crate::model::SlatModel;
use crate::tape::Tape;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean of the per-batch RMSE losses.
    pub train_loss: f64,
    pub val_rmse: Option<f64>,
    /// Learning rate of the epoch's last update.
    pub lr: f64,
    pub steps: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights were kept (1-based).
    pub best_epoch: usize,
    pub best_val_rmse: Option<f64>,
    pub stopped_early: bool,
    pub train_seconds: f64,
}

/// Batch RMSE, with parameter gradients.
pub fn batch_loss_and_grads(
    model: &SlatModel,
    batch: &[&WindowSample],
) -> Result<(f64, Vec<Vec<f64>>)> {
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape);
    let mut preds = Vec::with_capacity(batch.len());
    for s in batch {
        preds.push(model.forward(&mut tape, &bound, s)?);
    }
    let pred = tape.concat(&preds, 0)?;
    let target = tape.constant(Tensor::matrix(
        batch.len(),
        1,
        batch.iter().map(|s| s.label).collect(),
    )?);
    let mse = tape.mse_loss(pred, target)?;
    let loss = tape.sqrt(mse);
    let value = tape.value(loss).item()?;
    tape.backward(loss)?;
    Ok((value, model.params().gradients(&tape, &bound)))
}

fn prediction_rmse(model: &SlatModel, samples: &[WindowSample]) -> Result<f64> {
    let pred = model.predict_all(samples)?;
    let labels: Vec<f64> = samples.iter().map(|s| s.label).collect();
    rmse(&pred, &labels)
}

/// Sets the regression head's output bias to the mean training label.
pub fn init_output_bias(model: &mut SlatModel, samples: &[WindowSample]) {
    if samples.is_empty() {
        return;
    }
    let mean = samples.iter().map(|s| s.label).sum::<f64>() / samples.len() as f64;
    if let Some(b) = model.params_mut().by_name_mut("head.out.bias") {
        b.data_mut().fill(mean);
    }
}

/// Mini-batch Adam on the per-batch RMSE with the warm-up schedule.
///
/// With a non-empty `val`, the weights of the epoch with the lowest
/// validation RMSE are restored at the end, and training stops after
/// `patience` epochs without improvement. Without validation data the
/// final weights are kept.
pub fn train(
    model: &mut SlatModel,
    train_set: &[WindowSample],
    val: &[WindowSample],
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Contract("training set is empty".into()));
    }
    let start = Instant::now();
    if cfg.init_output_bias {
        init_output_bias(model, train_set);
    }
    let d_model = model.config().d_model;
    let mut adam = Adam::new(model.params(), cfg.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut history = TrainHistory {
        epochs: Vec::new(),
        best_epoch: 0,
        best_val_rmse: None,
        stopped_early: false,
        train_seconds: 0.0,
    };
    let mut best = None;
    let mut since_best = 0;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        let mut lr = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&WindowSample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (loss, grads) = batch_loss_and_grads(model, &batch)?;
            if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
                return Err(Error::Divergence {
                    epoch,
                    step: adam.steps() as usize + 1,
                    loss,
                });
            }
            lr = cfg.lr_scale * noam_lr(adam.steps() + 1, d_model, cfg.warmup_steps)?;
            adam.step(model.params_mut(), &grads, lr)?;
            loss_sum += loss;
            batches += 1;
        }
        let val_rmse = if val.is_empty() {
            None
        } else {
            Some(prediction_rmse(model, val)?)
        };
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            val_rmse,
            lr,
            steps: adam.steps(),
        });
        match val_rmse {
            None => history.best_epoch = epoch,
            Some(v) => {
                if history.best_val_rmse.is_none_or(|b| v < b) {
                    history.best_val_rmse = Some(v);
                    history.best_epoch = epoch;
                    best = Some(model.params().clone());
                    since_best = 0;
                } else {
                    since_best += 1;
                    if since_best >= cfg.patience {
                        history.stopped_early = true;
                        break;
                    }
                }
            }
        }
    }
    if let Some(best) = best {
        model.params_mut().copy_values_from(&best)?;
    }
    history.train_seconds = start.elapsed().as_secs_f64();
    Ok(history)
}
