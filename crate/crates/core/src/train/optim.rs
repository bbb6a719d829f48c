use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ParamStore;

/// Warm-up schedule: `d^-0.5 · min(sn^-0.5, sn · ws^-1.5)`.
pub fn noam_lr(step: u64, d_model: usize, warmup_steps: u64) -> Result<f64> {
    if step == 0 {
        return Err(Error::Contract("learning-rate step counts from 1".into()));
    }
    if d_model == 0 || warmup_steps == 0 {
        return Err(Error::Config(
            "d_model and warmup_steps must be positive".into(),
        ));
    }
    let sn = step as f64;
    let ws = warmup_steps as f64;
    Ok((d_model as f64).powf(-0.5) * sn.powf(-0.5).min(sn * ws.powf(-1.5)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-9,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let open = |b: f64| b > 0.0 && b < 1.0;
        if !open(self.beta1) || !open(self.beta2) {
            return Err(Error::Config(format!(
                "Adam betas ({}, {}) must lie in (0, 1)",
                self.beta1, self.beta2
            )));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::Config("Adam eps must be positive".into()));
        }
        Ok(())
    }
}

/// First and second moments for one flat parameter buffer.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Moments {
    pub fn zeros(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// One bias-corrected Adam update; `step` is the 1-based update count.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    moments: &mut Moments,
    step: u64,
    lr: f64,
    cfg: &AdamConfig,
) -> Result<()> {
    let n = params.len();
    if grads.len() != n || moments.m.len() != n || moments.v.len() != n {
        return Err(Error::Dimension {
            op: "adam_step",
            lhs: vec![n],
            rhs: vec![grads.len()],
        });
    }
    if step == 0 {
        return Err(Error::Contract("Adam step counts from 1".into()));
    }
    let c1 = 1.0 - cfg.beta1.powi(step as i32);
    let c2 = 1.0 - cfg.beta2.powi(step as i32);
    for i in 0..n {
        let g = grads[i];
        let m = cfg.beta1 * moments.m[i] + (1.0 - cfg.beta1) * g;
        let v = cfg.beta2 * moments.v[i] + (1.0 - cfg.beta2) * g * g;
        moments.m[i] = m;
        moments.v[i] = v;
        params[i] -= lr * (m / c1) / ((v / c2).sqrt() + cfg.eps);
    }
    Ok(())
}

/// Adam over every tensor of a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Adam {
    pub cfg: AdamConfig,
    step: u64,
    moments: Vec<Moments>,
}

impl Adam {
    pub fn new(params: &ParamStore, cfg: AdamConfig) -> Self {
        Self {
            cfg,
            step: 0,
            moments: params
                .tensors()
                .iter()
                .map(|t| Moments::zeros(t.numel()))
                .collect(),
        }
    }

    /// Updates taken so far.
    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &[Vec<f64>], lr: f64) -> Result<()> {
        if grads.len() != self.moments.len() {
            return Err(Error::Contract(format!(
                "{} gradient buffers for {} parameters",
                grads.len(),
                self.moments.len()
            )));
        }
        self.step += 1;
        for (((_, t), g), m) in params.iter_mut().zip(grads).zip(&mut self.moments) {
            adam_step(t.data_mut(), g, m, self.step, lr, &self.cfg)?;
        }
        Ok(())
    }
}
