//! Decoder-only Italian–English translation: a small reverse-mode autodiff
//! engine, the transformer architecture, a byte-level BPE tokenizer, corpus
//! curation, Lion training, greedy/beam decoding and BLEU/chrF scoring.

pub mod autodiff;
pub mod data;
pub mod decoder;
pub mod kv;
pub mod metrics;
pub mod model;
pub mod tokenizer;
pub mod trainer;
mod error;
pub mod real;

pub use error::{Error, Result};
pub use real::{DType, Real};
