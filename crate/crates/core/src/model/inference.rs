//! Tape-free forward pass with an incremental key/value cache.
//!
//! Each row is computed with the same fixed-order kernels whether the caller
//! feeds one token or a whole sequence, so step-by-step decoding reproduces a
//! full recomputation bit for bit.

use super::layers::{ScoreFlow, LN_EPS, QK_EPS};
use super::params::{DietaModel, LayerParams};
use crate::autodiff::kernels::{dot, vec_mat};
use crate::autodiff::rope_tables;
use crate::error::{Error, Result};
use crate::real::Real;

/// Per-layer rotated, normalized keys and raw values for every processed
/// position.
#[derive(Clone, Debug)]
pub struct KvCache<F> {
    keys: Vec<Vec<F>>,
    values: Vec<Vec<F>>,
    len: usize,
}

impl<F> KvCache<F> {
    /// Number of positions already processed.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

fn layer_norm_row<F: Real>(x: &mut [F], gain: &[F], bias: &[F]) {
    let n = F::from_f64(x.len() as f64);
    let mean = x.iter().copied().sum::<F>() / n;
    let var = x.iter().map(|v| (*v - mean) * (*v - mean)).sum::<F>() / n;
    let inv = F::one() / (var + F::from_f64(LN_EPS)).sqrt();
    for ((v, g), b) in x.iter_mut().zip(gain).zip(bias) {
        *v = (*v - mean) * inv * *g + *b;
    }
}

fn normalize_heads<F: Real>(x: &mut [F], head_dim: usize) {
    let eps = F::from_f64(QK_EPS);
    for chunk in x.chunks_exact_mut(head_dim) {
        let n = chunk.iter().map(|v| *v * *v).sum::<F>().sqrt();
        let d = n.max(eps);
        chunk.iter_mut().for_each(|v| *v = *v / d);
    }
}

fn rotate_heads<F: Real>(x: &mut [F], cos: &[F], sin: &[F], head_dim: usize) {
    let half = head_dim / 2;
    for chunk in x.chunks_exact_mut(head_dim) {
        for i in 0..half {
            let (a, b) = (chunk[2 * i], chunk[2 * i + 1]);
            chunk[2 * i] = a * cos[i] - b * sin[i];
            chunk[2 * i + 1] = a * sin[i] + b * cos[i];
        }
    }
}

impl<F: Real> DietaModel<F> {
    pub fn new_cache(&self) -> KvCache<F> {
        KvCache {
            keys: vec![Vec::new(); self.config.n_layers],
            values: vec![Vec::new(); self.config.n_layers],
            len: 0,
        }
    }

    /// Logits `[T × vocab]` for a single sequence.
    pub fn forward(&self, tokens: &[u32]) -> Result<Vec<F>> {
        self.forward_with(tokens, ScoreFlow::Accumulate)
    }

    pub fn forward_with(&self, tokens: &[u32], flow: ScoreFlow) -> Result<Vec<F>> {
        let mut cache = self.new_cache();
        self.extend_with(&mut cache, tokens, flow, true)
    }

    /// Appends `tokens` to the cached prefix and returns the logits of the
    /// new positions (all of them, or only the last when `all_rows` is off).
    pub fn extend(&self, cache: &mut KvCache<F>, tokens: &[u32]) -> Result<Vec<F>> {
        self.extend_with(cache, tokens, ScoreFlow::Accumulate, true)
    }

    /// Like [`extend`](Self::extend) but only the final row's logits.
    pub fn extend_last(&self, cache: &mut KvCache<F>, tokens: &[u32]) -> Result<Vec<F>> {
        self.extend_with(cache, tokens, ScoreFlow::Accumulate, false)
    }

    pub fn extend_with(
        &self,
        cache: &mut KvCache<F>,
        tokens: &[u32],
        flow: ScoreFlow,
        all_rows: bool,
    ) -> Result<Vec<F>> {
        let cfg = &self.config;
        let start = cache.len;
        let total = start + tokens.len();
        if total > cfg.max_seq_len {
            return Err(Error::Length {
                len: total,
                max: cfg.max_seq_len,
            });
        }
        let d = cfg.d_model;
        let mut x = Vec::with_capacity(tokens.len() * d);
        for &id in tokens {
            let id = id as usize;
            if id >= cfg.vocab_size {
                return Err(Error::Index {
                    what: "token id",
                    index: id,
                    bound: cfg.vocab_size,
                });
            }
            x.extend_from_slice(&self.embed.data()[id * d..(id + 1) * d]);
        }
        if tokens.is_empty() {
            return Ok(Vec::new());
        }
        let positions: Vec<usize> = (start..total).collect();
        let (cos, sin) = rope_tables::<F>(&positions, cfg.head_dim(), cfg.rope_base);

        // Score rows for the new positions: [row][head][key], key < total.
        let mut prev: Option<Vec<F>> = None;
        for (li, layer) in self.layers.iter().enumerate() {
            let scores = self.layer_rows(layer, &mut x, prev.as_deref(), cache, li, start, &cos, &sin);
            prev = match flow {
                ScoreFlow::Accumulate => Some(scores),
                ScoreFlow::Independent => None,
            };
        }
        cache.len = total;

        let vocab = cfg.vocab_size;
        let rows: Vec<usize> = if all_rows {
            (0..tokens.len()).collect()
        } else {
            vec![tokens.len() - 1]
        };
        let mut logits = vec![F::zero(); rows.len() * vocab];
        for (out, &r) in logits.chunks_exact_mut(vocab).zip(&rows) {
            let xr = &x[r * d..(r + 1) * d];
            match &self.head {
                Some(h) => vec_mat(xr, h.data(), vocab, out),
                None => {
                    for (o, e) in out.iter_mut().zip(self.embed.data().chunks_exact(d)) {
                        *o = dot(xr, e);
                    }
                }
            }
        }
        Ok(logits)
    }

    #[allow(clippy::too_many_arguments)]
    fn layer_rows(
        &self,
        layer: &LayerParams<F>,
        x: &mut [F],
        prev: Option<&[F]>,
        cache: &mut KvCache<F>,
        li: usize,
        start: usize,
        cos: &[F],
        sin: &[F],
    ) -> Vec<F> {
        let cfg = &self.config;
        let (d, heads, hd) = (cfg.d_model, cfg.n_heads, cfg.head_dim());
        let half = hd / 2;
        let n = x.len() / d;
        let total = start + n;
        let mut q = vec![F::zero(); n * d];
        let mut k = vec![F::zero(); d];
        let mut v = vec![F::zero(); d];
        for r in 0..n {
            let xr = &x[r * d..(r + 1) * d];
            let qr = &mut q[r * d..(r + 1) * d];
            vec_mat(xr, layer.wq.data(), d, qr);
            vec_mat(xr, layer.wk.data(), d, &mut k);
            vec_mat(xr, layer.wv.data(), d, &mut v);
            normalize_heads(qr, hd);
            normalize_heads(&mut k, hd);
            let (c, s) = (&cos[r * half..(r + 1) * half], &sin[r * half..(r + 1) * half]);
            rotate_heads(qr, c, s, hd);
            rotate_heads(&mut k, c, s, hd);
            cache.keys[li].extend_from_slice(&k);
            cache.values[li].extend_from_slice(&v);
        }
        let keys = &cache.keys[li];
        let values = &cache.values[li];
        let gains = layer.qk_gain.data();

        let mut scores = vec![F::zero(); n * heads * total];
        let mut mixed = vec![F::zero(); d];
        let mut probs = vec![F::zero(); total];
        let mut attn_out = vec![F::zero(); d];
        let ffn = cfg.ffn_dim();
        let mut hidden = vec![F::zero(); ffn];
        let mut ffn_out = vec![F::zero(); d];
        for r in 0..n {
            let pos = start + r;
            mixed.iter_mut().for_each(|m| *m = F::zero());
            for h in 0..heads {
                let qh = &q[r * d + h * hd..r * d + (h + 1) * hd];
                let row = &mut scores[(r * heads + h) * total..(r * heads + h + 1) * total];
                for j in 0..=pos {
                    row[j] = gains[h] * dot(qh, &keys[j * d + h * hd..j * d + (h + 1) * hd]);
                }
                if let Some(p) = prev {
                    let prow = &p[(r * heads + h) * total..(r * heads + h + 1) * total];
                    for j in 0..=pos {
                        row[j] += prow[j];
                    }
                }
                let max = row[..=pos].iter().copied().fold(F::neg_infinity(), F::max);
                let mut z = F::zero();
                for j in 0..=pos {
                    probs[j] = (row[j] - max).exp();
                    z += probs[j];
                }
                let out = &mut mixed[h * hd..(h + 1) * hd];
                for j in 0..=pos {
                    let p = probs[j] / z;
                    for (o, vv) in out.iter_mut().zip(&values[j * d + h * hd..j * d + (h + 1) * hd]) {
                        *o += p * *vv;
                    }
                }
            }
            let xr = &mut x[r * d..(r + 1) * d];
            vec_mat(&mixed, layer.wo.data(), d, &mut attn_out);
            for (a, b) in xr.iter_mut().zip(&attn_out) {
                *a += *b;
            }
            layer_norm_row(xr, layer.norm1_gain.data(), layer.norm1_bias.data());
            vec_mat(xr, layer.ffn_in.data(), ffn, &mut hidden);
            hidden.iter_mut().for_each(|v| {
                let r = v.max(F::zero());
                *v = r * r;
            });
            vec_mat(&hidden, layer.ffn_out.data(), d, &mut ffn_out);
            for (a, b) in xr.iter_mut().zip(&ffn_out) {
                *a += *b;
            }
            layer_norm_row(xr, layer.norm2_gain.data(), layer.norm2_bias.data());
        }
        scores
    }
}

/// Applies rotary embeddings to a `[T × n_heads × head_dim]` buffer, row `t`
/// rotated for position `positions[t]`.
pub fn rope_apply<F: Real>(x: &[F], positions: &[usize], head_dim: usize, base: f64) -> Result<Vec<F>> {
    if head_dim == 0 || head_dim % 2 != 0 {
        return Err(Error::Config(format!("rotary head dimension must be even, got {head_dim}")));
    }
    if positions.is_empty() || x.len() % positions.len() != 0 || (x.len() / positions.len()) % head_dim != 0 {
        return Err(Error::Shape {
            op: "rope_apply",
            lhs: vec![x.len()],
            rhs: vec![positions.len(), head_dim],
        });
    }
    let width = x.len() / positions.len();
    let half = head_dim / 2;
    let (cos, sin) = rope_tables::<F>(positions, head_dim, base);
    let mut out = x.to_vec();
    for (r, row) in out.chunks_exact_mut(width).enumerate() {
        rotate_heads(row, &cos[r * half..(r + 1) * half], &sin[r * half..(r + 1) * half], head_dim);
    }
    Ok(out)
}

/// L2-normalizes every `head_dim` chunk in place (zero vectors stay zero).
pub fn qk_normalize<F: Real>(x: &mut [F], head_dim: usize) {
    normalize_heads(x, head_dim);
}
