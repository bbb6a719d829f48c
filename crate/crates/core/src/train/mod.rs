//! Optimization, evaluation and the multi-run protocol.

mod metrics;
mod optim;
mod session;
mod trainer;

pub use metrics::{ci_scoring, default_ci_widths, rmse, CiCurve};
pub use optim::{adam_step, noam_lr, Adam, AdamConfig, Moments};
pub use session::{
    fit, multi_run, read_rtf_csv, split_validation, write_rtf_csv, Evaluation, MetricsReport,
    Preprocessing, RtfRow, RunMetrics, TrainedModel,
};
pub use trainer::{batch_loss_and_grads, init_output_bias, train, EpochRecord, TrainHistory};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub warmup_steps: u64,
    pub adam: AdamConfig,
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Fraction of training units held out for early stopping.
    pub validation_fraction: f64,
    pub runs: usize,
    pub seed: u64,
    /// Multiplier on the warm-up schedule.
    pub lr_scale: f64,
    /// Start the output bias at the mean training label.
    pub init_output_bias: bool,
    /// Append operating conditions to the sensor channels.
    pub include_op_conditions: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            warmup_steps: 4000,
            adam: AdamConfig::default(),
            batch_size: 64,
            patience: 20,
            validation_fraction: 0.1,
            runs: 25,
            seed: 0,
            lr_scale: 1.0,
            init_output_bias: false,
            include_op_conditions: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.warmup_steps == 0 || self.batch_size == 0 || self.runs == 0 {
            return Err(Error::Config(
                "epochs, warmup_steps, batch_size and runs must be positive".into(),
            ));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config(format!(
                "validation_fraction {} not in [0, 1)",
                self.validation_fraction
            )));
        }
        if !(self.lr_scale > 0.0 && self.lr_scale.is_finite()) {
            return Err(Error::Config("lr_scale must be positive".into()));
        }
        self.adam.validate()
    }
}
