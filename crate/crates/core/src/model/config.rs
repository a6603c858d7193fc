use crate::error::{Error, Result};
use crate::kv::KvMap;

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub ffn_multiplier: usize,
    pub rope_base: f64,
    pub max_seq_len: usize,
    pub tie_output: bool,
}

/// Parameter totals split the way the size arithmetic is usually quoted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamCount {
    /// Embedding, attention projections, FFN matrices and output head.
    pub matrices: usize,
    /// Layer-norm gains/biases and per-head QK scales.
    pub norms_and_scales: usize,
}

impl ParamCount {
    pub fn total(&self) -> usize {
        self.matrices + self.norms_and_scales
    }
}

impl ModelConfig {
    /// Full-size preset: 51,200-token vocabulary, six 2048-wide layers with
    /// 32 heads and a 4× feed-forward expansion.
    pub fn paper() -> Self {
        ModelConfig {
            vocab_size: 51_200,
            d_model: 2048,
            n_heads: 32,
            n_layers: 6,
            ffn_multiplier: 4,
            rope_base: 10_000.0,
            max_seq_len: 512,
            tie_output: false,
        }
    }

    /// Small preset used for gradient checks and toy experiments.
    pub fn desk() -> Self {
        ModelConfig {
            vocab_size: 512,
            d_model: 128,
            n_heads: 4,
            n_layers: 2,
            ffn_multiplier: 4,
            rope_base: 10_000.0,
            max_seq_len: 128,
            tie_output: false,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn ffn_dim(&self) -> usize {
        self.d_model * self.ffn_multiplier
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.d_model == 0 || self.n_heads == 0 || self.n_layers == 0 {
            return Err(Error::Config("vocab_size, d_model, n_heads and n_layers must be positive".into()));
        }
        if self.ffn_multiplier == 0 || self.max_seq_len == 0 {
            return Err(Error::Config("ffn_multiplier and max_seq_len must be positive".into()));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.head_dim() % 2 != 0 {
            return Err(Error::Config(format!(
                "head dimension {} must be even for rotary embeddings",
                self.head_dim()
            )));
        }
        if !(self.rope_base.is_finite() && self.rope_base > 1.0) {
            return Err(Error::Config(format!("rope_base {} must be > 1", self.rope_base)));
        }
        Ok(())
    }

    /// Counts parameters without allocating any of them.
    pub fn param_count(&self) -> ParamCount {
        let d = self.d_model;
        let per_layer_matrices = 4 * d * d + 2 * d * self.ffn_dim();
        let per_layer_small = 4 * d + self.n_heads;
        let embed = self.vocab_size * d;
        let head = if self.tie_output { 0 } else { d * self.vocab_size };
        ParamCount {
            matrices: embed + head + self.n_layers * per_layer_matrices,
            norms_and_scales: self.n_layers * per_layer_small,
        }
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::new();
        kv.set("vocab_size", self.vocab_size);
        kv.set("d_model", self.d_model);
        kv.set("n_heads", self.n_heads);
        kv.set("n_layers", self.n_layers);
        kv.set("ffn_multiplier", self.ffn_multiplier);
        // Debug formatting of f64 is shortest-round-trip.
        kv.set("rope_base", format!("{:?}", self.rope_base));
        kv.set("max_seq_len", self.max_seq_len);
        kv.set("tie_output", self.tie_output);
        kv
    }

    pub fn from_kv(kv: &KvMap) -> Result<Self> {
        let cfg = ModelConfig {
            vocab_size: kv.require("vocab_size")?,
            d_model: kv.require("d_model")?,
            n_heads: kv.require("n_heads")?,
            n_layers: kv.require("n_layers")?,
            ffn_multiplier: kv.require("ffn_multiplier")?,
            rope_base: kv.require("rope_base")?,
            max_seq_len: kv.require("max_seq_len")?,
            tie_output: kv.require("tie_output")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Starts from `base` and overrides whichever keys `kv` carries.
    pub fn overlay(base: &ModelConfig, kv: &KvMap) -> Result<Self> {
        let mut merged = base.to_kv();
        for key in ["vocab_size", "d_model", "n_heads", "n_layers", "ffn_multiplier", "rope_base", "max_seq_len", "tie_output"] {
            if let Some(v) = kv.raw(key) {
                merged.set(key, v);
            }
        }
        Self::from_kv(&merged)
    }
}
