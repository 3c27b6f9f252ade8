//! Binary checkpoint container.
//!
//! Layout (all little-endian): magic `MCN1`, version `u32`, tensor count
//! `u32`, then per tensor: name length `u16` + name bytes, rank `u8`, one
//! `u32` extent per dimension, and the raw f32 payload. Parameters round
//! trip bit-exactly.
//!
//! Model parameters are stored under their layer names (`conv1.w` ...
//! `dense2.b`), optimizer moments as `opt.<param>.m` / `opt.<param>.v` with
//! the scalar step counter `opt.t`. Run metadata rides along as small
//! tensors of exactly-representable values: the config snapshot as one byte
//! per element (`meta.config`), the input extents (`meta.input`), fold and
//! epoch scalars, and the 64-bit seed split into four 16-bit chunks
//! (`meta.seed`).

use std::io::{Read, Write};
use std::path::Path;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::nn::{build_proposed_cnn_with, Model};
use crate::optim::{AdamW, Moments};
use crate::tensor::Tensor;

const MAGIC: [u8; 4] = *b"MCN1";
const VERSION: u32 = 1;

/// Write named tensors in container order.
pub fn write_container(path: &Path, tensors: &[(String, &Tensor)]) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, tensor) in tensors {
        let name_bytes = name.as_bytes();
        if name_bytes.len() > u16::MAX as usize {
            return Err(Error::Checkpoint(format!("tensor name '{name}' too long")));
        }
        buf.extend_from_slice(&(name_bytes.len() as u16).to_le_bytes());
        buf.extend_from_slice(name_bytes);
        let shape = tensor.shape();
        if shape.len() > u8::MAX as usize {
            return Err(Error::Checkpoint(format!("tensor '{name}' rank too high")));
        }
        buf.push(shape.len() as u8);
        for &extent in shape {
            buf.extend_from_slice(&(extent as u32).to_le_bytes());
        }
        for &v in tensor.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Read every tensor of a container, in stored order.
pub fn read_container(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let mut cursor = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let end = cursor
            .checked_add(n)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::Checkpoint("container truncated".into()))?;
        let slice = &bytes[cursor..end];
        cursor = end;
        Ok(slice)
    };

    if take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic, not an MCN1 container".into()));
    }
    let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let count = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = u16::from_le_bytes(take(2)?.try_into().unwrap()) as usize;
        let name = String::from_utf8(take(name_len)?.to_vec())
            .map_err(|_| Error::Checkpoint("tensor name is not utf-8".into()))?;
        let rank = take(1)?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize);
        }
        let len: usize = shape.iter().product();
        let payload = take(len * 4)?;
        let data: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push((name, Tensor::from_vec(&shape, data)?));
    }
    if cursor != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after the last tensor",
            bytes.len() - cursor
        )));
    }
    Ok(tensors)
}

fn scalar(value: f32) -> Tensor {
    Tensor::from_vec(&[], vec![value]).expect("rank-0 tensor")
}

fn seed_tensor(seed: u64) -> Tensor {
    let chunks: Vec<f32> = (0..4).map(|i| ((seed >> (16 * i)) & 0xFFFF) as f32).collect();
    Tensor::from_vec(&[4], chunks).expect("seed tensor")
}

fn seed_from_tensor(t: &Tensor) -> Result<u64> {
    if t.shape() != [4] {
        return Err(Error::Checkpoint("meta.seed must be four 16-bit chunks".into()));
    }
    Ok(t.data()
        .iter()
        .enumerate()
        .map(|(i, &c)| (c as u64) << (16 * i))
        .sum())
}

fn text_tensor(text: &str) -> Tensor {
    let data: Vec<f32> = text.bytes().map(|b| b as f32).collect();
    Tensor::from_vec(&[data.len()], data).expect("text tensor")
}

fn text_from_tensor(t: &Tensor) -> Result<String> {
    let bytes: Vec<u8> = t.data().iter().map(|&v| v as u8).collect();
    String::from_utf8(bytes).map_err(|_| Error::Checkpoint("meta.config is not utf-8".into()))
}

/// A reloaded checkpoint: model, optional optimizer state, and the run
/// metadata it was saved with.
pub struct Checkpoint {
    pub model: Model,
    pub optimizer: Option<AdamW>,
    pub config: ExperimentConfig,
    pub fold: usize,
    pub epoch: usize,
    pub seed: u64,
}

/// Save model parameters, optimizer state and run metadata as one container.
pub fn save(
    path: &Path,
    model: &Model,
    optimizer: Option<&AdamW>,
    config: &ExperimentConfig,
    fold: usize,
    epoch: usize,
) -> Result<()> {
    let config_text = config.to_file_string();
    let (h, w, c) = model.spec().input;
    let input = Tensor::from_vec(&[3], vec![h as f32, w as f32, c as f32])?;
    let meta_config = text_tensor(&config_text);
    let meta_fold = scalar(fold as f32);
    let meta_epoch = scalar(epoch as f32);
    let meta_seed = seed_tensor(config.seed);

    let mut tensors: Vec<(String, &Tensor)> = Vec::new();
    for p in model.params() {
        tensors.push((p.name.clone(), &p.value));
    }
    let opt_tensors: Vec<(String, Tensor)> = match optimizer {
        Some(opt) => {
            let mut v = vec![("opt.t".to_string(), scalar(opt.t() as f32))];
            for (p, m) in model.params().iter().zip(opt.moments()) {
                v.push((format!("opt.{}.m", p.name), m.m.clone()));
                v.push((format!("opt.{}.v", p.name), m.v.clone()));
            }
            v
        }
        None => Vec::new(),
    };
    for (name, t) in &opt_tensors {
        tensors.push((name.clone(), t));
    }
    tensors.push(("meta.config".into(), &meta_config));
    tensors.push(("meta.input".into(), &input));
    tensors.push(("meta.fold".into(), &meta_fold));
    tensors.push(("meta.epoch".into(), &meta_epoch));
    tensors.push(("meta.seed".into(), &meta_seed));
    write_container(path, &tensors)
}

/// Load a checkpoint and rebuild the model it describes. Evaluating the
/// result is bit-identical to evaluating the model that was saved.
pub fn load(path: &Path) -> Result<Checkpoint> {
    let tensors = read_container(path)?;
    let find = |name: &str| -> Result<&Tensor> {
        tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor '{name}'")))
    };

    let config = ExperimentConfig::parse_str(&text_from_tensor(find("meta.config")?)?)?;
    let input_t = find("meta.input")?;
    if input_t.shape() != [3] {
        return Err(Error::Checkpoint("meta.input must hold three extents".into()));
    }
    let input = (
        input_t.data()[0] as usize,
        input_t.data()[1] as usize,
        input_t.data()[2] as usize,
    );
    let fold = find("meta.fold")?.data()[0] as usize;
    let epoch = find("meta.epoch")?.data()[0] as usize;
    let seed = seed_from_tensor(find("meta.seed")?)?;

    // The class count is carried by the output bias.
    let classes = find("dense2.b")?.len();
    let spec = build_proposed_cnn_with(input, classes, config.leaky_slope, config.dropout)?;
    let mut model = Model::zeros(spec)?;
    for p in model.params_mut() {
        let stored = find(&p.name)?;
        if stored.shape() != p.value.shape() {
            return Err(Error::Checkpoint(format!(
                "tensor '{}' has shape {:?}, expected {:?}",
                p.name,
                stored.shape(),
                p.value.shape()
            )));
        }
        p.value = stored.clone();
    }

    let optimizer = if tensors.iter().any(|(n, _)| n == "opt.t") {
        let t = find("opt.t")?.data()[0] as u64;
        let mut moments = Vec::with_capacity(model.params().len());
        for p in model.params() {
            moments.push(Moments {
                m: find(&format!("opt.{}.m", p.name))?.clone(),
                v: find(&format!("opt.{}.v", p.name))?.clone(),
            });
        }
        Some(AdamW::restore(config.adamw(), t, moments))
    } else {
        None
    };

    Ok(Checkpoint {
        model,
        optimizer,
        config,
        fold,
        epoch,
        seed,
    })
}
