//! Differentiable forward pass recorded on a [`Tape`].

use super::config::ModelConfig;
use super::params::{LayerVars, ParamVars};
use crate::autodiff::{AttnShape, Tape, Var};
use crate::error::{Error, Result};
use crate::real::Real;

/// Layer-norm variance guard.
pub const LN_EPS: f64 = 1e-5;
/// Guard for L2-normalizing an all-zero query or key.
pub const QK_EPS: f64 = 1e-6;

/// Whether pre-softmax attention logits are carried from layer to layer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ScoreFlow {
    /// Each layer adds the previous layer's raw logits to its own.
    #[default]
    Accumulate,
    /// Plain attention: every layer starts from its own logits only.
    Independent,
}

/// Batch geometry of a forward pass: `batch` sequences of `seq` tokens.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Geometry {
    pub batch: usize,
    pub seq: usize,
}

impl Geometry {
    pub fn attn(&self, cfg: &ModelConfig) -> AttnShape {
        AttnShape {
            batch: self.batch,
            seq: self.seq,
            heads: cfg.n_heads,
            head_dim: cfg.head_dim(),
        }
    }

    /// Position of every row of a `[batch*seq, d]` activation.
    pub fn positions(&self) -> Vec<usize> {
        (0..self.batch * self.seq).map(|r| r % self.seq).collect()
    }
}

/// QK-normalized causal self-attention with optional score accumulation.
///
/// Returns the sublayer output and this layer's pre-mask, pre-softmax
/// logits, which the next layer adds to its own.
pub fn attention<F: Real>(
    tape: &mut Tape<F>,
    x: Var,
    prev_scores: Option<Var>,
    lv: &LayerVars,
    cfg: &ModelConfig,
    geom: Geometry,
) -> Result<(Var, Var)> {
    if geom.seq > cfg.max_seq_len {
        return Err(Error::Length {
            len: geom.seq,
            max: cfg.max_seq_len,
        });
    }
    let shape = geom.attn(cfg);
    let positions = geom.positions();
    let eps = F::from_f64(QK_EPS);
    let q = tape.matmul(x, lv.wq)?;
    let k = tape.matmul(x, lv.wk)?;
    let v = tape.matmul(x, lv.wv)?;
    let q = tape.l2_normalize(q, shape.head_dim, eps)?;
    let k = tape.l2_normalize(k, shape.head_dim, eps)?;
    let q = tape.rope(q, &positions, shape.head_dim, cfg.rope_base)?;
    let k = tape.rope(k, &positions, shape.head_dim, cfg.rope_base)?;
    let dots = tape.head_dots(q, k, shape)?;
    let mut logits = tape.scale_heads(dots, lv.qk_gain)?;
    if let Some(prev) = prev_scores {
        logits = tape.add(logits, prev)?;
    }
    let probs = tape.causal_softmax(logits)?;
    let mixed = tape.attn_mix(probs, v, shape)?;
    let out = tape.matmul(mixed, lv.wo)?;
    Ok((out, logits))
}

/// Post-norm block: `y = LN₁(x + Attn(x))`, `x' = LN₂(y + W₂·relu²(W₁·y))`.
pub fn decoder_layer<F: Real>(
    tape: &mut Tape<F>,
    x: Var,
    prev_scores: Option<Var>,
    lv: &LayerVars,
    cfg: &ModelConfig,
    geom: Geometry,
) -> Result<(Var, Var)> {
    let eps = F::from_f64(LN_EPS);
    let (attn, scores) = attention(tape, x, prev_scores, lv, cfg, geom)?;
    let r1 = tape.add(x, attn)?;
    let y = tape.layer_norm(r1, lv.norm1_gain, lv.norm1_bias, eps)?;
    let h = tape.matmul(y, lv.ffn_in)?;
    let h = tape.squared_relu(h);
    let f = tape.matmul(h, lv.ffn_out)?;
    let r2 = tape.add(y, f)?;
    let out = tape.layer_norm(r2, lv.norm2_gain, lv.norm2_bias, eps)?;
    Ok((out, scores))
}

/// Logits `[batch*seq × vocab]` for a row-major `[batch × seq]` token grid.
pub fn forward_batch<F: Real>(
    tape: &mut Tape<F>,
    vars: &ParamVars,
    cfg: &ModelConfig,
    tokens: &[u32],
    geom: Geometry,
    flow: ScoreFlow,
) -> Result<Var> {
    if tokens.len() != geom.batch * geom.seq {
        return Err(Error::Shape {
            op: "forward_batch",
            lhs: vec![geom.batch, geom.seq],
            rhs: vec![tokens.len()],
        });
    }
    if geom.seq > cfg.max_seq_len {
        return Err(Error::Length {
            len: geom.seq,
            max: cfg.max_seq_len,
        });
    }
    let mut x = tape.embedding(vars.embed, tokens)?;
    let mut scores = None;
    for lv in &vars.layers {
        let (next, s) = decoder_layer(tape, x, scores, lv, cfg, geom)?;
        x = next;
        scores = match flow {
            ScoreFlow::Accumulate => Some(s),
            ScoreFlow::Independent => None,
        };
    }
    match vars.head {
        Some(head) => tape.matmul(x, head),
        None => {
            let et = tape.transpose(vars.embed)?;
            tape.matmul(x, et)
        }
    }
}

/// Mean next-token cross-entropy over the positions selected by `mask`.
pub fn lm_loss<F: Real>(
    tape: &mut Tape<F>,
    vars: &ParamVars,
    cfg: &ModelConfig,
    inputs: &[u32],
    targets: &[u32],
    mask: &[bool],
    geom: Geometry,
) -> Result<Var> {
    let logits = forward_batch(tape, vars, cfg, inputs, geom, ScoreFlow::Accumulate)?;
    tape.cross_entropy(logits, targets, mask)
}
