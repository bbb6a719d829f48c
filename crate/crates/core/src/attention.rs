//! Position-based sparse attention.
//!
//! Masks are dense boolean matrices. The sparse pattern used by the model is
//! the union of a band (local neighbourhood) and a set of global positions
//! that attend to, and are attended from, every position.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::tape::{Tape, Var};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttentionMask {
    rows: usize,
    cols: usize,
    allowed: Vec<bool>,
}

impl AttentionMask {
    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut allowed = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                allowed.push(f(i, j));
            }
        }
        Self {
            rows,
            cols,
            allowed,
        }
    }

    /// Every query attends to every key.
    pub fn all(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            allowed: vec![true; rows * cols],
        }
    }

    /// `allowed(i, j) ⇔ |i − j| ≤ half_width`.
    pub fn band(n: usize, half_width: usize) -> Self {
        Self::from_fn(n, n, |i, j| i.abs_diff(j) <= half_width)
    }

    /// `allowed(i, j) ⇔ i ∈ G ∨ j ∈ G`. An empty `G` yields an empty (invalid) mask.
    pub fn global(n: usize, nodes: &[usize]) -> Result<Self> {
        let mut is_global = vec![false; n];
        for &g in nodes {
            if g >= n {
                return Err(Error::Contract(format!(
                    "global node {g} out of range for length {n}"
                )));
            }
            is_global[g] = true;
        }
        Ok(Self::from_fn(n, n, |i, j| is_global[i] || is_global[j]))
    }

    /// Elementwise OR; the result must have a non-empty row everywhere.
    pub fn union(&self, other: &AttentionMask) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(dim_err(
                "union_mask",
                &[self.rows, self.cols],
                &[other.rows, other.cols],
            ));
        }
        let m = Self {
            rows: self.rows,
            cols: self.cols,
            allowed: self
                .allowed
                .iter()
                .zip(&other.allowed)
                .map(|(a, b)| *a || *b)
                .collect(),
        };
        m.validate()?;
        Ok(m)
    }

    /// Band of `half_width` around the diagonal plus the first `global_count` positions as global nodes.
    pub fn sparse(n: usize, half_width: usize, global_count: usize) -> Result<Self> {
        let band = Self::band(n, half_width);
        if global_count == 0 {
            return Ok(band);
        }
        let nodes: Vec<usize> = (0..global_count.min(n)).collect();
        band.union(&Self::global(n, &nodes)?)
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..self.rows {
            if !self.row(i).iter().any(|&a| a) {
                return Err(Error::DegenerateMask { row: i });
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_allowed(&self, i: usize, j: usize) -> bool {
        self.allowed[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.allowed[i * self.cols..(i + 1) * self.cols]
    }

    pub fn count_allowed(&self) -> usize {
        self.allowed.iter().filter(|&&a| a).count()
    }

    pub fn is_all_allowed(&self) -> bool {
        self.allowed.iter().all(|&a| a)
    }
}

/// Which width the attention scores are divided by (under a square root).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreScaling {
    /// `√D_model`, independent of the head count.
    #[default]
    Model,
    /// `√head_dim`.
    Head,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MultiHeadConfig {
    pub d_model: usize,
    pub heads: usize,
    pub scaling: ScoreScaling,
}

/// Upper bound on `d_model` enforced by the low-rank configuration.
pub const DEFAULT_D_MODEL_CEILING: usize = 64;

impl MultiHeadConfig {
    pub fn new(d_model: usize, heads: usize, scaling: ScoreScaling) -> Result<Self> {
        let cfg = Self {
            d_model,
            heads,
            scaling,
        };
        cfg.validate(DEFAULT_D_MODEL_CEILING)?;
        Ok(cfg)
    }

    pub fn validate(&self, ceiling: usize) -> Result<()> {
        if self.heads == 0 || self.d_model == 0 {
            return Err(Error::Config("d_model and heads must be positive".into()));
        }
        if !self.d_model.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "d_model {} is not divisible by {} heads",
                self.d_model, self.heads
            )));
        }
        if self.d_model > ceiling {
            return Err(Error::Config(format!(
                "d_model {} exceeds the low-rank ceiling {ceiling}",
                self.d_model
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    pub fn score_scale(&self) -> f64 {
        let width = match self.scaling {
            ScoreScaling::Model => self.d_model,
            ScoreScaling::Head => self.head_dim(),
        };
        1.0 / (width as f64).sqrt()
    }
}

/// Projection weights of one multi-head attention sublayer, already bound to a tape.
#[derive(Clone, Debug)]
pub struct MultiHeadWeights {
    /// Per head, `d_model × head_dim`.
    pub query: Vec<Var>,
    pub key: Vec<Var>,
    pub value: Vec<Var>,
    /// `(heads · head_dim) × d_model`.
    pub output: Var,
}

/// Scaled attention scores `q·kᵀ · scale`.
pub fn scaled_scores(tape: &mut Tape, q: Var, k: Var, scale: f64) -> Result<Var> {
    let kt = tape.transpose(k)?;
    let s = tape.matmul(q, kt)?;
    Ok(tape.scale(s, scale))
}

/// `softmax(q·kᵀ · scale, mask) · v`.
pub fn attention(
    tape: &mut Tape,
    q: Var,
    k: Var,
    v: Var,
    mask: &AttentionMask,
    scale: f64,
) -> Result<Var> {
    let (lq, d) = tape.value(q).expect_matrix("attention")?;
    let (lk, dk) = tape.value(k).expect_matrix("attention")?;
    let (lv, _) = tape.value(v).expect_matrix("attention")?;
    if d != dk || lk != lv {
        return Err(dim_err(
            "attention",
            tape.value(q).shape(),
            tape.value(k).shape(),
        ));
    }
    if mask.rows() != lq || mask.cols() != lk {
        return Err(dim_err("attention", &[lq, lk], &[mask.rows(), mask.cols()]));
    }
    let scores = scaled_scores(tape, q, k, scale)?;
    let weights = tape.masked_softmax(scores, mask)?;
    tape.matmul(weights, v)
}

/// Multi-head attention: per-head projections, masked attention, concat, output projection.
pub fn multi_head(
    tape: &mut Tape,
    query_src: Var,
    key_src: Var,
    value_src: Var,
    cfg: &MultiHeadConfig,
    mask: &AttentionMask,
    weights: &MultiHeadWeights,
) -> Result<Var> {
    let h = cfg.heads;
    if weights.query.len() != h || weights.key.len() != h || weights.value.len() != h {
        return Err(Error::Contract(format!(
            "expected {h} head projections, got {}/{}/{}",
            weights.query.len(),
            weights.key.len(),
            weights.value.len()
        )));
    }
    for src in [query_src, key_src, value_src] {
        let (_, w) = tape.value(src).expect_matrix("multi_head")?;
        if w != cfg.d_model {
            return Err(dim_err(
                "multi_head",
                tape.value(src).shape(),
                &[cfg.d_model],
            ));
        }
    }
    let scale = cfg.score_scale();
    let mut heads = Vec::with_capacity(h);
    for i in 0..h {
        let q = tape.matmul(query_src, weights.query[i])?;
        let k = tape.matmul(key_src, weights.key[i])?;
        let v = tape.matmul(value_src, weights.value[i])?;
        heads.push(attention(tape, q, k, v, mask, scale)?);
    }
    let joined = if h == 1 {
        heads[0]
    } else {
        tape.concat(&heads, 1)?
    };
    tape.matmul(joined, weights.output)
}
