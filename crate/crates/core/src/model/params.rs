use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::ModelConfig;
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::real::Real;

/// Standard deviation of the normal initializer for all matrices.
pub const INIT_STD: f64 = 0.02;

/// Weights of one post-norm decoder layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<F> {
    pub wq: Tensor<F>,
    pub wk: Tensor<F>,
    pub wv: Tensor<F>,
    pub wo: Tensor<F>,
    pub ffn_in: Tensor<F>,
    pub ffn_out: Tensor<F>,
    pub norm1_gain: Tensor<F>,
    pub norm1_bias: Tensor<F>,
    pub norm2_gain: Tensor<F>,
    pub norm2_bias: Tensor<F>,
    /// One learned logit scale per head, replacing 1/√d_head.
    pub qk_gain: Tensor<F>,
}

const LAYER_FIELDS: [&str; 11] = [
    "wq", "wk", "wv", "wo", "ffn_in", "ffn_out", "norm1.gain", "norm1.bias", "norm2.gain", "norm2.bias", "qk_gain",
];

impl<F: Real> LayerParams<F> {
    fn tensors(&self) -> [&Tensor<F>; 11] {
        [
            &self.wq,
            &self.wk,
            &self.wv,
            &self.wo,
            &self.ffn_in,
            &self.ffn_out,
            &self.norm1_gain,
            &self.norm1_bias,
            &self.norm2_gain,
            &self.norm2_bias,
            &self.qk_gain,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Tensor<F>; 11] {
        [
            &mut self.wq,
            &mut self.wk,
            &mut self.wv,
            &mut self.wo,
            &mut self.ffn_in,
            &mut self.ffn_out,
            &mut self.norm1_gain,
            &mut self.norm1_bias,
            &mut self.norm2_gain,
            &mut self.norm2_bias,
            &mut self.qk_gain,
        ]
    }
}

/// The full parameter set of the decoder-only network.
#[derive(Clone, Debug, PartialEq)]
pub struct DietaModel<F> {
    pub(crate) config: ModelConfig,
    pub embed: Tensor<F>,
    pub layers: Vec<LayerParams<F>>,
    /// Output projection `[d_model × vocab]`; `None` when tied to `embed`.
    pub head: Option<Tensor<F>>,
}

/// Tape handles for every parameter of a [`DietaModel`].
#[derive(Clone, Debug)]
pub struct ParamVars {
    pub embed: Var,
    pub layers: Vec<LayerVars>,
    pub head: Option<Var>,
}

#[derive(Clone, Copy, Debug)]
pub struct LayerVars {
    pub wq: Var,
    pub wk: Var,
    pub wv: Var,
    pub wo: Var,
    pub ffn_in: Var,
    pub ffn_out: Var,
    pub norm1_gain: Var,
    pub norm1_bias: Var,
    pub norm2_gain: Var,
    pub norm2_bias: Var,
    pub qk_gain: Var,
}

impl ParamVars {
    /// Handles in the same order as [`DietaModel::named_params`].
    pub fn all(&self) -> Vec<Var> {
        let mut out = vec![self.embed];
        for l in &self.layers {
            out.extend([
                l.wq,
                l.wk,
                l.wv,
                l.wo,
                l.ffn_in,
                l.ffn_out,
                l.norm1_gain,
                l.norm1_bias,
                l.norm2_gain,
                l.norm2_bias,
                l.qk_gain,
            ]);
        }
        out.extend(self.head);
        out
    }
}

impl<F: Real> DietaModel<F> {
    /// Random initialization: N(0, 0.02) matrices, unit gains, zero biases,
    /// QK scales at √d_head.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let mut matrix = |rows: usize, cols: usize| -> Tensor<F> {
            let data = (0..rows * cols)
                .map(|_| F::from_f64(normal.sample(&mut rng)))
                .collect();
            Tensor::new(vec![rows, cols], data).expect("shape").with_grad()
        };
        let d = config.d_model;
        let ffn = config.ffn_dim();
        let embed = matrix(config.vocab_size, d);
        let mut layers = Vec::with_capacity(config.n_layers);
        for _ in 0..config.n_layers {
            layers.push(LayerParams {
                wq: matrix(d, d),
                wk: matrix(d, d),
                wv: matrix(d, d),
                wo: matrix(d, d),
                ffn_in: matrix(d, ffn),
                ffn_out: matrix(ffn, d),
                norm1_gain: Tensor::filled(&[d], F::one()).with_grad(),
                norm1_bias: Tensor::zeros(&[d]).with_grad(),
                norm2_gain: Tensor::filled(&[d], F::one()).with_grad(),
                norm2_bias: Tensor::zeros(&[d]).with_grad(),
                qk_gain: Tensor::filled(&[config.n_heads], F::from_f64((config.head_dim() as f64).sqrt()))
                    .with_grad(),
            });
        }
        let head = (!config.tie_output).then(|| matrix(d, config.vocab_size));
        Ok(DietaModel {
            config,
            embed,
            layers,
            head,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Parameters with stable dotted names, e.g. `layers.0.wq`.
    pub fn named_params(&self) -> Vec<(String, &Tensor<F>)> {
        let mut out = vec![("embed".to_string(), &self.embed)];
        for (i, layer) in self.layers.iter().enumerate() {
            for (field, t) in LAYER_FIELDS.iter().zip(layer.tensors()) {
                out.push((format!("layers.{i}.{field}"), t));
            }
        }
        if let Some(h) = &self.head {
            out.push(("head".to_string(), h));
        }
        out
    }

    pub fn named_params_mut(&mut self) -> Vec<(String, &mut Tensor<F>)> {
        let mut out = vec![("embed".to_string(), &mut self.embed)];
        for (i, layer) in self.layers.iter_mut().enumerate() {
            for (field, t) in LAYER_FIELDS.iter().zip(layer.tensors_mut()) {
                out.push((format!("layers.{i}.{field}"), t));
            }
        }
        if let Some(h) = self.head.as_mut() {
            out.push(("head".to_string(), h));
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.numel()).sum()
    }

    pub fn zero_grads(&mut self) {
        for (_, t) in self.named_params_mut() {
            t.zero_grad();
        }
    }

    pub fn cast<G: Real>(&self) -> DietaModel<G> {
        DietaModel {
            config: self.config.clone(),
            embed: self.embed.cast(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    wq: l.wq.cast(),
                    wk: l.wk.cast(),
                    wv: l.wv.cast(),
                    wo: l.wo.cast(),
                    ffn_in: l.ffn_in.cast(),
                    ffn_out: l.ffn_out.cast(),
                    norm1_gain: l.norm1_gain.cast(),
                    norm1_bias: l.norm1_bias.cast(),
                    norm2_gain: l.norm2_gain.cast(),
                    norm2_bias: l.norm2_bias.cast(),
                    qk_gain: l.qk_gain.cast(),
                })
                .collect(),
            head: self.head.as_ref().map(Tensor::cast),
        }
    }

    /// Copies every parameter onto `tape` as a differentiable leaf.
    pub fn record(&self, tape: &mut Tape<F>) -> ParamVars {
        let embed = tape.leaf(&self.embed);
        let layers = self
            .layers
            .iter()
            .map(|l| LayerVars {
                wq: tape.leaf(&l.wq),
                wk: tape.leaf(&l.wk),
                wv: tape.leaf(&l.wv),
                wo: tape.leaf(&l.wo),
                ffn_in: tape.leaf(&l.ffn_in),
                ffn_out: tape.leaf(&l.ffn_out),
                norm1_gain: tape.leaf(&l.norm1_gain),
                norm1_bias: tape.leaf(&l.norm1_bias),
                norm2_gain: tape.leaf(&l.norm2_gain),
                norm2_bias: tape.leaf(&l.norm2_bias),
                qk_gain: tape.leaf(&l.qk_gain),
            })
            .collect();
        let head = self.head.as_ref().map(|h| tape.leaf(h));
        ParamVars { embed, layers, head }
    }

    /// Adds the leaf gradients held on `tape` into the parameter accumulators.
    pub fn accumulate_grads(&mut self, tape: &Tape<F>, vars: &ParamVars) -> Result<()> {
        let handles = vars.all();
        let params = self.named_params_mut();
        if handles.len() != params.len() {
            return Err(Error::Contract("parameter handles do not match the model".into()));
        }
        for ((name, t), v) in params.into_iter().zip(handles) {
            let g = tape
                .grad(v)
                .ok_or_else(|| Error::Contract(format!("parameter {name} was recorded without gradient")))?;
            t.accumulate_grad(g)?;
        }
        Ok(())
    }
}
