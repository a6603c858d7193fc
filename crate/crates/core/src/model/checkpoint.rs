//! Binary checkpoint format.
//!
//! ```text
//! "DIETA1"
//! u32 LE byte length, then UTF-8 `key=value\n` lines (model config + dtype)
//! u32 LE parameter count
//! per parameter:
//!   u32 LE name length, name bytes (UTF-8)
//!   u32 LE rank, rank × u64 LE extents
//!   raw little-endian values (f32 unless the header says dtype=f64)
//! ```
//!
//! Further sections (the optimizer state, see `trainer::lion`) may follow.

use std::io::{Read, Write};
use std::path::Path;

use super::config::ModelConfig;
use super::params::DietaModel;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::kv::KvMap;
use crate::real::{DType, Real};

pub const MODEL_MAGIC: &[u8; 6] = b"DIETA1";

fn bad(reason: impl Into<String>) -> Error {
    Error::format("<checkpoint>", reason)
}

pub(crate) fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn write_text<W: Write>(w: &mut W, text: &str) -> Result<()> {
    write_u32(w, text.len() as u32)?;
    w.write_all(text.as_bytes())?;
    Ok(())
}

pub(crate) fn read_text<R: Read>(r: &mut R, limit: usize) -> Result<String> {
    let len = read_u32(r)? as usize;
    if len > limit {
        return Err(bad(format!("text block of {len} bytes exceeds limit {limit}")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| bad("text block is not UTF-8"))
}

/// Writes named tensors as `(name, rank, extents, raw values)` records,
/// preceded by their count.
pub(crate) fn write_tensors<F: Real, W: Write>(w: &mut W, tensors: &[(String, &Tensor<F>)]) -> Result<()> {
    write_u32(w, tensors.len() as u32)?;
    let mut buf = Vec::new();
    for (name, t) in tensors {
        write_text(w, name)?;
        write_u32(w, t.shape().len() as u32)?;
        for &e in t.shape() {
            write_u64(w, e as u64)?;
        }
        buf.clear();
        buf.reserve(t.numel() * F::DTYPE.size_of());
        for v in t.data() {
            v.write_le(&mut buf);
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

/// Reads tensors stored in `stored` precision, converting to `F`.
pub(crate) fn read_tensors<F: Real, R: Read>(r: &mut R, stored: DType) -> Result<Vec<(String, Tensor<F>)>> {
    let count = read_u32(r)? as usize;
    let mut out = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let name = read_text(r, 1 << 16)?;
        let rank = read_u32(r)? as usize;
        if rank > 8 {
            return Err(bad(format!("tensor {name} has implausible rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u64(r)? as usize);
        }
        let n: usize = shape.iter().product();
        let mut raw = vec![0u8; n * stored.size_of()];
        r.read_exact(&mut raw)?;
        let data = match stored {
            DType::F32 => raw.chunks_exact(4).map(|c| F::from_f64(f32::read_le(c) as f64)).collect(),
            DType::F64 => raw.chunks_exact(8).map(|c| F::from_f64(f64::read_le(c))).collect(),
        };
        out.push((name, Tensor::new(shape, data)?));
    }
    Ok(out)
}

impl<F: Real> DietaModel<F> {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MODEL_MAGIC)?;
        let mut header = self.config.to_kv();
        header.set("dtype", F::DTYPE);
        write_text(w, &header.to_text())?;
        write_tensors(w, &self.named_params())
    }

    /// Reads a model section, leaving `r` positioned after it.
    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 6];
        r.read_exact(&mut magic)?;
        if &magic != MODEL_MAGIC {
            return Err(bad(format!("bad magic {magic:?}")));
        }
        let header = KvMap::parse(&read_text(r, 1 << 20)?)?;
        let config = ModelConfig::from_kv(&header)?;
        let dtype = match header.raw("dtype") {
            None => DType::F32,
            Some(s) => DType::parse(s).ok_or_else(|| bad(format!("unknown dtype {s}")))?,
        };
        let tensors = read_tensors::<F, _>(r, dtype)?;
        let mut model = DietaModel::<F>::new(config, 0)?;
        let mut slots = model.named_params_mut();
        if slots.len() != tensors.len() {
            return Err(bad(format!(
                "expected {} parameters, found {}",
                slots.len(),
                tensors.len()
            )));
        }
        for ((name, slot), (stored_name, t)) in slots.iter_mut().zip(tensors) {
            if *name != stored_name || slot.shape() != t.shape() {
                return Err(bad(format!(
                    "parameter {stored_name} {:?} does not match expected {name} {:?}",
                    t.shape(),
                    slot.shape()
                )));
            }
            slot.data_mut().copy_from_slice(t.data());
        }
        drop(slots);
        model.zero_grads();
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut r).map_err(|e| match e {
            Error::Format { reason, .. } => Error::format(path, reason),
            other => other,
        })
    }
}
