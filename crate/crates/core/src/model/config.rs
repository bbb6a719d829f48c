use serde::{Deserialize, Serialize};

use crate::attention::{MultiHeadConfig, ScoreScaling, DEFAULT_D_MODEL_CEILING};
use crate::data::STAT_ROWS;
use crate::error::{Error, Result};

/// Structural hyper-parameters of the network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlatConfig {
    pub d_model: usize,
    pub encoder_blocks: usize,
    pub decoder_blocks: usize,
    pub heads: usize,
    pub ffn_hidden: usize,
    /// Width of the hidden layer in the regression head.
    pub head_hidden: usize,
    /// Sliding-window length `T_w`.
    pub window: usize,
    /// Number of most recent window rows fed to the decoder (`M`).
    pub decoder_steps: usize,
    pub band_half_width: usize,
    pub global_nodes: usize,
    pub rul_max: f64,
    pub ln_eps: f64,
    pub score_scaling: ScoreScaling,
    /// Apply the band/global pattern to decoder self-attention as well.
    pub decoder_sparse: bool,
    pub d_model_ceiling: usize,
}

impl Default for SlatConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            encoder_blocks: 4,
            decoder_blocks: 2,
            heads: 8,
            ffn_hidden: 64,
            head_hidden: 64,
            window: 40,
            decoder_steps: 1,
            band_half_width: 2,
            global_nodes: 1,
            rul_max: 125.0,
            ln_eps: 1e-12,
            score_scaling: ScoreScaling::Model,
            decoder_sparse: false,
            d_model_ceiling: DEFAULT_D_MODEL_CEILING,
        }
    }
}

impl SlatConfig {
    /// The `d_model = 8, h = 2, n = m = 1, T_w = 8, M = 1` configuration used for gradient checks.
    pub fn tiny() -> Self {
        Self {
            d_model: 8,
            encoder_blocks: 1,
            decoder_blocks: 1,
            heads: 2,
            ffn_hidden: 8,
            head_hidden: 8,
            window: 8,
            decoder_steps: 1,
            band_half_width: 2,
            global_nodes: 1,
            ..Self::default()
        }
    }

    /// [`SlatConfig::tiny`] widened to `d_model = 16` (FFN and head width 16).
    /// This is the configuration the learning-signal check trains on the mini preset.
    pub fn small() -> Self {
        Self {
            d_model: 16,
            ffn_hidden: 16,
            head_hidden: 16,
            ..Self::tiny()
        }
    }

    pub fn attention(&self) -> MultiHeadConfig {
        MultiHeadConfig {
            d_model: self.d_model,
            heads: self.heads,
            scaling: self.score_scaling,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_shape()?;
        if self.encoder_blocks == 0 || self.decoder_blocks == 0 {
            return Err(Error::Config(
                "encoder and decoder need at least one block each".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn validate_shape(&self) -> Result<()> {
        self.attention().validate(self.d_model_ceiling)?;
        if self.decoder_steps == 0 || self.decoder_steps >= self.window {
            return Err(Error::Config(format!(
                "decoder_steps must satisfy 1 <= M < T_w, got M = {} with T_w = {}",
                self.decoder_steps, self.window
            )));
        }
        if self.ffn_hidden == 0 || self.head_hidden == 0 {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        if self.rul_max.is_nan() || self.rul_max <= 0.0 {
            return Err(Error::Config("rul_max must be positive".into()));
        }
        if self.ln_eps.is_nan() || self.ln_eps <= 0.0 {
            return Err(Error::Config("ln_eps must be positive".into()));
        }
        Ok(())
    }
}

/// Input geometry the network is built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDims {
    /// Rows of the encoder matrix (window plus statistical rows).
    pub seq_len: usize,
    /// Channels per row (`d_k`).
    pub channels: usize,
}

impl InputDims {
    pub fn for_window(window: usize, channels: usize) -> Self {
        Self {
            seq_len: window + STAT_ROWS,
            channels,
        }
    }
}
