use std::io::{Read, Write};

use crate::autodiff::Tensor;
use crate::kv::KvMap;
use crate::model::{read_tensors, read_text, write_tensors, write_text, DietaModel};
use crate::real::{DType, Real};
use crate::{Error, Result};

pub const LION_MAGIC: &[u8; 5] = b"LION1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LionConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
}

impl Default for LionConfig {
    fn default() -> Self {
        LionConfig {
            beta1: 0.9,
            beta2: 0.99,
            weight_decay: 0.01,
        }
    }
}

/// One Lion update of `param` in place:
/// `c = β1·m + (1−β1)·g`, `p −= lr·(sign(c) + λ·p)`, `m = β2·m + (1−β2)·g`.
pub fn lion_step<F: Real>(param: &mut [F], grad: &[F], momentum: &mut [F], cfg: &LionConfig, lr: f64) -> Result<()> {
    if param.len() != grad.len() || param.len() != momentum.len() {
        return Err(Error::Contract(format!(
            "lion_step: param {}, grad {}, momentum {} elements",
            param.len(),
            grad.len(),
            momentum.len()
        )));
    }
    let b1 = F::from_f64(cfg.beta1);
    let b2 = F::from_f64(cfg.beta2);
    let one = F::one();
    let wd = F::from_f64(cfg.weight_decay);
    let lr = F::from_f64(lr);
    for ((p, &g), m) in param.iter_mut().zip(grad).zip(momentum.iter_mut()) {
        let c = b1 * *m + (one - b1) * g;
        let sign = if c > F::zero() {
            one
        } else if c < F::zero() {
            -one
        } else {
            F::zero()
        };
        *p = *p - lr * (sign + wd * *p);
        *m = b2 * *m + (one - b2) * g;
    }
    Ok(())
}

/// Momentum buffers mirroring a model's parameters, plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct LionState<F: Real> {
    pub config: LionConfig,
    pub step: u64,
    moments: Vec<(String, Tensor<F>)>,
}

impl<F: Real> LionState<F> {
    pub fn new(model: &DietaModel<F>, config: LionConfig) -> Self {
        let moments = model
            .named_params()
            .into_iter()
            .map(|(n, t)| (n, Tensor::zeros(t.shape())))
            .collect();
        LionState {
            config,
            step: 0,
            moments,
        }
    }

    pub fn moments(&self) -> &[(String, Tensor<F>)] {
        &self.moments
    }

    /// Applies one update to every parameter using its accumulated gradient.
    /// Parameters without a gradient buffer see only weight decay.
    pub fn update(&mut self, model: &mut DietaModel<F>, lr: f64) -> Result<()> {
        let params = model.named_params_mut();
        if params.len() != self.moments.len() {
            return Err(Error::Contract("optimizer state does not match the model".into()));
        }
        for ((name, p), (mname, m)) in params.into_iter().zip(self.moments.iter_mut()) {
            if name != *mname || p.shape() != m.shape() {
                return Err(Error::Contract(format!("momentum {mname} does not match parameter {name}")));
            }
            let zeros;
            let (data, grad) = p.data_and_grad_mut();
            let grad = match grad {
                Some(g) => g,
                None => {
                    zeros = vec![F::zero(); data.len()];
                    &zeros
                }
            };
            lion_step(data, grad, m.data_mut(), &self.config, lr)?;
        }
        self.step += 1;
        Ok(())
    }

    /// Writes the `LION1` section; `extra` entries land in its header.
    pub fn write_to<W: Write>(&self, w: &mut W, extra: &KvMap) -> Result<()> {
        w.write_all(LION_MAGIC)?;
        let mut header = KvMap::new();
        header.set("beta1", format!("{:?}", self.config.beta1));
        header.set("beta2", format!("{:?}", self.config.beta2));
        header.set("weight_decay", format!("{:?}", self.config.weight_decay));
        header.set("step", self.step);
        header.set("dtype", F::DTYPE);
        header.merge(extra);
        write_text(w, &header.to_text())?;
        let refs: Vec<(String, &Tensor<F>)> = self.moments.iter().map(|(n, t)| (n.clone(), t)).collect();
        write_tensors(w, &refs)
    }

    /// Reads a `LION1` section written for `model`, returning its header too.
    pub fn read_from<R: Read>(r: &mut R, model: &DietaModel<F>) -> Result<(Self, KvMap)> {
        let bad = |reason: String| Error::format("<optimizer state>", reason);
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)
            .map_err(|_| bad("checkpoint has no optimizer section".into()))?;
        if &magic != LION_MAGIC {
            return Err(bad(format!("bad magic {magic:?}")));
        }
        let header = KvMap::parse(&read_text(r, 1 << 20)?)?;
        let dtype = DType::parse(&header.require::<String>("dtype")?)
            .ok_or_else(|| bad("unknown dtype".into()))?;
        let config = LionConfig {
            beta1: header.require("beta1")?,
            beta2: header.require("beta2")?,
            weight_decay: header.require("weight_decay")?,
        };
        let step = header.require("step")?;
        let moments = read_tensors::<F, _>(r, dtype)?;
        let expected = model.named_params();
        if moments.len() != expected.len()
            || moments
                .iter()
                .zip(&expected)
                .any(|((n, t), (en, et))| n != en || t.shape() != et.shape())
        {
            return Err(bad("momentum tensors do not match the model".into()));
        }
        Ok((LionState { config, step, moments }, header))
    }
}
