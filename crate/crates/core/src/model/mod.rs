//! The dual-aspect encoder/decoder regression network.
//!
//! Two encoder stacks run in parallel: one over time steps (rows of the
//! window), one over channels (rows of its transpose). Their outputs are
//! stacked and projected into a `d_model × d_model` memory that the decoder
//! cross-attends to. A flatten + two-layer head maps the decoder output to
//! a single RUL value.

mod checkpoint;
mod config;
mod params;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION,
};
pub use config::{InputDims, SlatConfig};
pub use params::{Bound, ParamId, ParamStore};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attention::{multi_head, AttentionMask, MultiHeadWeights};
use crate::data::WindowSample;
use crate::error::{dim_err, Result};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Sinusoidal position table: `PE[t,2k] = sin(t / 10000^(2k/d))`, `PE[t,2k+1] = cos(t / 10000^((2k+1)/d))`.
pub fn positional_encoding(len: usize, d_model: usize) -> Tensor {
    let mut data = vec![0.0; len * d_model];
    for t in 0..len {
        for j in 0..d_model {
            let angle = t as f64 / 10000f64.powf(j as f64 / d_model as f64);
            data[t * d_model + j] = if j % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    Tensor::matrix(len, d_model, data).expect("shape matches data")
}

#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

#[derive(Clone, Debug)]
pub struct Norm {
    pub gain: ParamId,
    pub bias: ParamId,
}

#[derive(Clone, Debug)]
pub struct Attention {
    pub query: Vec<ParamId>,
    pub key: Vec<ParamId>,
    pub value: Vec<ParamId>,
    pub output: ParamId,
}

#[derive(Clone, Debug)]
pub struct FeedForward {
    pub inner: Linear,
    pub outer: Linear,
}

/// Pre-LN self-attention block: `x + MHA(LN(x))`, then `x + FFN(LN(x))`.
#[derive(Clone, Debug)]
pub struct EncoderBlock {
    pub attn_norm: Norm,
    pub attn: Attention,
    pub ffn_norm: Norm,
    pub ffn: FeedForward,
}

/// Pre-LN decoder block with self-attention, cross-attention into the encoder memory, and FFN.
#[derive(Clone, Debug)]
pub struct DecoderBlock {
    pub self_norm: Norm,
    pub self_attn: Attention,
    pub cross_norm: Norm,
    pub cross_attn: Attention,
    pub ffn_norm: Norm,
    pub ffn: FeedForward,
}

#[derive(Clone, Debug)]
struct Masks {
    time: AttentionMask,
    sensor: AttentionMask,
    decoder: AttentionMask,
    cross: AttentionMask,
}

/// Intermediate encoder outputs, kept for inspection and tests.
#[derive(Clone, Copy, Debug)]
pub struct EncoderOutput {
    pub time: Var,
    pub sensor: Var,
    pub fused: Var,
}

#[derive(Clone, Debug)]
pub struct SlatModel {
    config: SlatConfig,
    dims: InputDims,
    params: ParamStore,
    time_embed: Linear,
    sensor_embed: Linear,
    decoder_embed: Linear,
    time_encoder: Vec<EncoderBlock>,
    sensor_encoder: Vec<EncoderBlock>,
    fusion: ParamId,
    decoder: Vec<DecoderBlock>,
    head_hidden: Linear,
    head_out: Linear,
    time_pe: Tensor,
    sensor_pe: Tensor,
    masks: Masks,
}

struct Builder {
    store: ParamStore,
}

impl Builder {
    /// Values are filled in by [`SlatModel::reinitialize`], keyed on the name suffix.
    fn add(&mut self, name: String, shape: Vec<usize>) -> ParamId {
        self.store.push(name, Tensor::zeros(shape))
    }

    fn linear(&mut self, name: &str, fan_in: usize, fan_out: usize) -> Linear {
        Linear {
            weight: self.add(format!("{name}.weight"), vec![fan_in, fan_out]),
            bias: self.add(format!("{name}.bias"), vec![fan_out]),
        }
    }

    fn norm(&mut self, name: &str, width: usize) -> Norm {
        Norm {
            gain: self.add(format!("{name}.gain"), vec![width]),
            bias: self.add(format!("{name}.bias"), vec![width]),
        }
    }

    fn attention(&mut self, name: &str, cfg: &SlatConfig) -> Attention {
        let hd = cfg.d_model / cfg.heads;
        let mut proj = |kind: &str| -> Vec<ParamId> {
            (0..cfg.heads)
                .map(|h| self.add(format!("{name}.{kind}.{h}"), vec![cfg.d_model, hd]))
                .collect()
        };
        let query = proj("query");
        let key = proj("key");
        let value = proj("value");
        let output = self.add(format!("{name}.output"), vec![cfg.heads * hd, cfg.d_model]);
        Attention {
            query,
            key,
            value,
            output,
        }
    }

    fn ffn(&mut self, name: &str, cfg: &SlatConfig) -> FeedForward {
        FeedForward {
            inner: self.linear(&format!("{name}.inner"), cfg.d_model, cfg.ffn_hidden),
            outer: self.linear(&format!("{name}.outer"), cfg.ffn_hidden, cfg.d_model),
        }
    }

    fn encoder_block(&mut self, name: &str, cfg: &SlatConfig) -> EncoderBlock {
        EncoderBlock {
            attn_norm: self.norm(&format!("{name}.attn_norm"), cfg.d_model),
            attn: self.attention(&format!("{name}.attn"), cfg),
            ffn_norm: self.norm(&format!("{name}.ffn_norm"), cfg.d_model),
            ffn: self.ffn(&format!("{name}.ffn"), cfg),
        }
    }

    fn decoder_block(&mut self, name: &str, cfg: &SlatConfig) -> DecoderBlock {
        DecoderBlock {
            self_norm: self.norm(&format!("{name}.self_norm"), cfg.d_model),
            self_attn: self.attention(&format!("{name}.self_attn"), cfg),
            cross_norm: self.norm(&format!("{name}.cross_norm"), cfg.d_model),
            cross_attn: self.attention(&format!("{name}.cross_attn"), cfg),
            ffn_norm: self.norm(&format!("{name}.ffn_norm"), cfg.d_model),
            ffn: self.ffn(&format!("{name}.ffn"), cfg),
        }
    }
}

impl SlatModel {
    /// Builds a model with weights drawn deterministically from `seed`.
    ///
    /// Weight matrices are uniform in `±1/√fan_in`; biases and LN offsets
    /// start at 0, LN gains at 1.
    pub fn init_parameters(config: SlatConfig, dims: InputDims, seed: u64) -> Result<Self> {
        config.validate()?;
        Self::init_unchecked(config, dims, seed)
    }

    /// Like [`SlatModel::init_parameters`] but allows zero encoder or decoder blocks.
    #[doc(hidden)]
    pub fn init_unchecked(config: SlatConfig, dims: InputDims, seed: u64) -> Result<Self> {
        let mut model = Self::layout(config, dims)?;
        model.reinitialize(seed);
        Ok(model)
    }

    /// Creates the parameter layout with all-zero values.
    pub(crate) fn layout(config: SlatConfig, dims: InputDims) -> Result<Self> {
        config.validate_shape()?;
        if dims.seq_len < 2 || dims.channels < 1 {
            return Err(crate::Error::Config(format!(
                "input needs at least 2 rows and 1 channel, got {dims:?}"
            )));
        }
        let cfg = &config;
        let d = cfg.d_model;
        let mut b = Builder {
            store: ParamStore::default(),
        };
        let time_embed = b.linear("time_embed", dims.channels, d);
        let sensor_embed = b.linear("sensor_embed", dims.seq_len, d);
        let time_encoder = (0..cfg.encoder_blocks)
            .map(|i| b.encoder_block(&format!("time_encoder.{i}"), cfg))
            .collect();
        let sensor_encoder = (0..cfg.encoder_blocks)
            .map(|i| b.encoder_block(&format!("sensor_encoder.{i}"), cfg))
            .collect();
        let fusion_rows = dims.seq_len + dims.channels;
        let fusion = b.add("fusion".into(), vec![fusion_rows, d]);
        let decoder_embed = b.linear("decoder_embed", dims.channels, d);
        let decoder = (0..cfg.decoder_blocks)
            .map(|i| b.decoder_block(&format!("decoder.{i}"), cfg))
            .collect();
        let head_hidden = b.linear("head.hidden", cfg.decoder_steps * d, cfg.head_hidden);
        let head_out = b.linear("head.out", cfg.head_hidden, 1);

        let g = cfg.global_nodes;
        let masks = Masks {
            time: AttentionMask::sparse(dims.seq_len, cfg.band_half_width, g)?,
            sensor: AttentionMask::sparse(dims.channels, cfg.band_half_width, g)?,
            decoder: if cfg.decoder_sparse {
                AttentionMask::sparse(cfg.decoder_steps, cfg.band_half_width, g)?
            } else {
                AttentionMask::all(cfg.decoder_steps, cfg.decoder_steps)
            },
            cross: AttentionMask::all(cfg.decoder_steps, d),
        };

        Ok(Self {
            time_pe: positional_encoding(dims.seq_len, d),
            sensor_pe: positional_encoding(dims.channels, d),
            config,
            dims,
            params: b.store,
            time_embed,
            sensor_embed,
            decoder_embed,
            time_encoder,
            sensor_encoder,
            fusion,
            decoder,
            head_hidden,
            head_out,
            masks,
        })
    }

    /// Redraws every parameter from `seed` using the documented scheme.
    pub fn reinitialize(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (name, t) in self.params.iter_mut() {
            let shape = t.shape().to_vec();
            let data = t.data_mut();
            if name.ends_with(".bias") {
                data.fill(0.0);
            } else if name.ends_with(".gain") {
                data.fill(1.0);
            } else {
                let fan_in = shape[0];
                let bound = 1.0 / (fan_in as f64).sqrt();
                for v in data.iter_mut() {
                    *v = rng.random_range(-bound..bound);
                }
            }
        }
    }

    pub fn config(&self) -> &SlatConfig {
        &self.config
    }

    pub fn dims(&self) -> InputDims {
        self.dims
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.numel()
    }

    /// Registers every parameter on `tape` as a gradient-tracked leaf.
    pub fn bind(&self, tape: &mut Tape) -> Bound {
        self.params.bind(tape)
    }

    pub fn time_mask(&self) -> &AttentionMask {
        &self.masks.time
    }

    pub fn sensor_mask(&self) -> &AttentionMask {
        &self.masks.sensor
    }

    fn weights(&self, bound: &Bound, a: &Attention) -> MultiHeadWeights {
        MultiHeadWeights {
            query: a.query.iter().map(|&p| bound.var(p)).collect(),
            key: a.key.iter().map(|&p| bound.var(p)).collect(),
            value: a.value.iter().map(|&p| bound.var(p)).collect(),
            output: bound.var(a.output),
        }
    }

    fn linear(&self, tape: &mut Tape, bound: &Bound, l: &Linear, x: Var) -> Result<Var> {
        tape.affine(x, bound.var(l.weight), bound.var(l.bias))
    }

    fn norm(&self, tape: &mut Tape, bound: &Bound, n: &Norm, x: Var) -> Result<Var> {
        tape.layer_norm(x, bound.var(n.gain), bound.var(n.bias), self.config.ln_eps)
    }

    fn ffn(&self, tape: &mut Tape, bound: &Bound, f: &FeedForward, x: Var) -> Result<Var> {
        let h = self.linear(tape, bound, &f.inner, x)?;
        let h = tape.relu(h);
        self.linear(tape, bound, &f.outer, h)
    }

    fn encoder_block(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        block: &EncoderBlock,
        mask: &AttentionMask,
        x: Var,
    ) -> Result<Var> {
        let mh = self.config.attention();
        let h = self.norm(tape, bound, &block.attn_norm, x)?;
        let a = multi_head(tape, h, h, h, &mh, mask, &self.weights(bound, &block.attn))?;
        let x = tape.add(x, a)?;
        let h = self.norm(tape, bound, &block.ffn_norm, x)?;
        let f = self.ffn(tape, bound, &block.ffn, h)?;
        tape.add(x, f)
    }

    #[allow(clippy::too_many_arguments)]
    fn encoder_path(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        input: Var,
        embed: &Linear,
        pe: &Tensor,
        blocks: &[EncoderBlock],
        mask: &AttentionMask,
    ) -> Result<Var> {
        let e = self.linear(tape, bound, embed, input)?;
        let pe = tape.constant(pe.clone());
        let mut x = tape.add(e, pe)?;
        for block in blocks {
            x = self.encoder_block(tape, bound, block, mask, x)?;
        }
        Ok(x)
    }

    /// Runs both encoder paths on a `seq_len × channels` matrix and fuses them into a `d_model × d_model` memory.
    pub fn encode(&self, tape: &mut Tape, bound: &Bound, window: Var) -> Result<EncoderOutput> {
        let shape = tape.value(window).shape().to_vec();
        if shape != [self.dims.seq_len, self.dims.channels] {
            return Err(dim_err(
                "encode",
                &shape,
                &[self.dims.seq_len, self.dims.channels],
            ));
        }
        let time = self.encoder_path(
            tape,
            bound,
            window,
            &self.time_embed,
            &self.time_pe,
            &self.time_encoder,
            &self.masks.time,
        )?;
        let transposed = tape.transpose(window)?;
        let sensor = self.encoder_path(
            tape,
            bound,
            transposed,
            &self.sensor_embed,
            &self.sensor_pe,
            &self.sensor_encoder,
            &self.masks.sensor,
        )?;
        let stacked = tape.concat(&[time, sensor], 0)?;
        let wf_t = tape.transpose(bound.var(self.fusion))?;
        let fused = tape.matmul(wf_t, stacked)?;
        Ok(EncoderOutput {
            time,
            sensor,
            fused,
        })
    }

    /// Decoder stack over the `M × channels` recent rows, cross-attending into `memory`.
    pub fn decode(&self, tape: &mut Tape, bound: &Bound, recent: Var, memory: Var) -> Result<Var> {
        let d = self.config.d_model;
        let rshape = tape.value(recent).shape().to_vec();
        if rshape != [self.config.decoder_steps, self.dims.channels] {
            return Err(dim_err(
                "decode",
                &rshape,
                &[self.config.decoder_steps, self.dims.channels],
            ));
        }
        let mshape = tape.value(memory).shape().to_vec();
        if mshape != [d, d] {
            return Err(dim_err("decode", &mshape, &[d, d]));
        }
        let mh = self.config.attention();
        let mut y = self.linear(tape, bound, &self.decoder_embed, recent)?;
        for block in &self.decoder {
            let h = self.norm(tape, bound, &block.self_norm, y)?;
            let a = multi_head(
                tape,
                h,
                h,
                h,
                &mh,
                &self.masks.decoder,
                &self.weights(bound, &block.self_attn),
            )?;
            y = tape.add(y, a)?;
            let h = self.norm(tape, bound, &block.cross_norm, y)?;
            let c = multi_head(
                tape,
                h,
                memory,
                memory,
                &mh,
                &self.masks.cross,
                &self.weights(bound, &block.cross_attn),
            )?;
            y = tape.add(y, c)?;
            let h = self.norm(tape, bound, &block.ffn_norm, y)?;
            let f = self.ffn(tape, bound, &block.ffn, h)?;
            y = tape.add(y, f)?;
        }
        Ok(y)
    }

    /// Flatten → FC + ReLU → FC(1).
    pub fn head(&self, tape: &mut Tape, bound: &Bound, decoded: Var) -> Result<Var> {
        let flat = tape.flatten(decoded);
        let h = self.linear(tape, bound, &self.head_hidden, flat)?;
        let h = tape.relu(h);
        self.linear(tape, bound, &self.head_out, h)
    }

    /// Full network on already-recorded encoder and decoder inputs. Returns a `1×1` node.
    pub fn forward_vars(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        encoder: Var,
        decoder: Var,
    ) -> Result<Var> {
        let enc = self.encode(tape, bound, encoder)?;
        let dec = self.decode(tape, bound, decoder, enc.fused)?;
        self.head(tape, bound, dec)
    }

    pub fn forward(&self, tape: &mut Tape, bound: &Bound, sample: &WindowSample) -> Result<Var> {
        let e = tape.constant(sample.encoder.clone());
        let d = tape.constant(sample.decoder.clone());
        self.forward_vars(tape, bound, e, d)
    }

    /// Inference on one sample.
    pub fn predict(&self, sample: &WindowSample) -> Result<f64> {
        let mut tape = Tape::new();
        let bound = self.bind_frozen(&mut tape);
        let out = self.forward(&mut tape, &bound, sample)?;
        tape.value(out).item()
    }

    pub fn predict_all(&self, samples: &[WindowSample]) -> Result<Vec<f64>> {
        samples.iter().map(|s| self.predict(s)).collect()
    }

    /// Binds parameters as constants (no gradient bookkeeping).
    pub fn bind_frozen(&self, tape: &mut Tape) -> Bound {
        self.params.bind_constant(tape)
    }
}
