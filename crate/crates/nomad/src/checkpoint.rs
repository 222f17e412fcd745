//! Model checkpoint file.
//!
//! Layout: the magic bytes `NOMAD1\n`, a little-endian `u32` header length,
//! a UTF-8 JSON header, then every parameter as a little-endian `f32` in the
//! order documented on [`nomad_core::net`].

use std::path::Path;

use nomad_core::{EmbeddingModel, EncoderConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub const MAGIC: &[u8; 7] = b"NOMAD1\n";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ConfigJson {
    bands: usize,
    channels: Vec<usize>,
    kernel: usize,
    stride: usize,
    embed_dim: usize,
    init_seed: u64,
    input_offset: f64,
    input_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    parameter_count: usize,
    config: ConfigJson,
}

impl From<&EncoderConfig> for ConfigJson {
    fn from(c: &EncoderConfig) -> Self {
        Self {
            bands: c.bands,
            channels: c.channels.clone(),
            kernel: c.kernel,
            stride: c.stride,
            embed_dim: c.embed_dim,
            init_seed: c.init_seed,
            input_offset: c.input_offset,
            input_scale: c.input_scale,
        }
    }
}

impl From<ConfigJson> for EncoderConfig {
    fn from(c: ConfigJson) -> Self {
        Self {
            bands: c.bands,
            channels: c.channels,
            kernel: c.kernel,
            stride: c.stride,
            embed_dim: c.embed_dim,
            init_seed: c.init_seed,
            input_offset: c.input_offset,
            input_scale: c.input_scale,
        }
    }
}

pub fn encode(model: &EmbeddingModel) -> Vec<u8> {
    let header = Header {
        format_version: FORMAT_VERSION,
        parameter_count: model.params().len(),
        config: model.config().into(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(MAGIC.len() + 4 + json.len() + 4 * model.params().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for &p in model.params() {
        out.extend_from_slice(&(p as f32).to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<EmbeddingModel> {
    let corrupt = |m: &str| Error::CorruptCheckpoint(m.into());
    let rest = bytes.strip_prefix(MAGIC.as_slice()).ok_or_else(|| corrupt("bad magic"))?;
    if rest.len() < 4 {
        return Err(corrupt("truncated header length"));
    }
    let (len, rest) = rest.split_at(4);
    let len = u32::from_le_bytes(len.try_into().expect("4 bytes")) as usize;
    if rest.len() < len {
        return Err(corrupt("truncated header"));
    }
    let (json, body) = rest.split_at(len);
    let header: Header =
        serde_json::from_slice(json).map_err(|e| Error::CorruptCheckpoint(format!("header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::CorruptCheckpoint(format!("unknown format version {}", header.format_version)));
    }
    let config = EncoderConfig::from(header.config);
    config.validate().map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
    if header.parameter_count != config.parameter_count() {
        return Err(Error::CorruptCheckpoint(format!(
            "header declares {} parameters but the config needs {}",
            header.parameter_count,
            config.parameter_count()
        )));
    }
    if body.len() != 4 * header.parameter_count {
        return Err(Error::CorruptCheckpoint(format!(
            "expected {} parameter bytes, found {}",
            4 * header.parameter_count,
            body.len()
        )));
    }
    let params: Vec<f64> = body
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
        .collect();
    if params.iter().any(|p| !p.is_finite()) {
        return Err(corrupt("non-finite parameter"));
    }
    EmbeddingModel::from_parts(config, params).map_err(|e| Error::CorruptCheckpoint(e.to_string()))
}

pub fn save_checkpoint(model: &EmbeddingModel, path: &Path) -> Result<()> {
    std::fs::write(path, encode(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<EmbeddingModel> {
    decode(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// Hex SHA-256 of the checkpoint file bytes.
pub fn checkpoint_hash(model: &EmbeddingModel) -> String {
    hex::encode(Sha256::digest(encode(model)))
}
