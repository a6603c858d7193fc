//! The decoder-only translation network.
//!
//! Token embeddings feed a stack of identical post-norm layers. Attention
//! L2-normalizes queries and keys per head, scales their dot product by a
//! learned per-head gain, rotates them with rotary position embeddings, and
//! adds the previous layer's raw logits before the causal mask and softmax.
//! The feed-forward sublayer uses a squared ReLU. The output head is a
//! separate projection unless `tie_output` is set.

mod checkpoint;
mod config;
mod inference;
mod layers;
mod params;

pub use checkpoint::MODEL_MAGIC;
pub(crate) use checkpoint::{read_tensors, read_text, write_tensors, write_text};
pub use config::{ModelConfig, ParamCount};
pub use inference::{qk_normalize, rope_apply, KvCache};
pub use layers::{attention, decoder_layer, forward_batch, lm_loss, Geometry, ScoreFlow, LN_EPS, QK_EPS};
pub use params::{DietaModel, LayerParams, LayerVars, ParamVars, INIT_STD};
