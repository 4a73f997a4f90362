//! `.nnck` files: `NNCK`, u32 version, u32 header length, UTF-8 JSON header,
//! then each tensor as little-endian f32 in header order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"NNCK";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    /// Free-form metadata: model config, seed, epoch, metrics.
    pub meta: serde_json::Value,
    pub tensors: Vec<TensorEntry>,
}

pub fn encode<'a>(
    meta: &serde_json::Value,
    tensors: impl IntoIterator<Item = (String, &'a Tensor<f32>)>,
) -> Result<Vec<u8>> {
    let tensors: Vec<(String, &Tensor<f32>)> = tensors.into_iter().collect();
    let header = CheckpointHeader {
        meta: meta.clone(),
        tensors: tensors
            .iter()
            .map(|(n, t)| TensorEntry {
                name: n.clone(),
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(12 + json.len() + 4 * tensors.iter().map(|t| t.1.len()).sum::<usize>());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, t) in &tensors {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8], origin: &Path) -> Result<(CheckpointHeader, Vec<Tensor<f32>>)> {
    let bad = |reason: &str| Error::format(origin, reason);
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(bad("missing NNCK magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(bad(&format!("unsupported checkpoint version {version}")));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let body = bytes.get(12..12 + hlen).ok_or_else(|| bad("truncated header"))?;
    let header: CheckpointHeader = serde_json::from_slice(body).map_err(|e| bad(&format!("bad header: {e}")))?;
    let mut pos = 12 + hlen;
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for entry in &header.tensors {
        let n: usize = entry.shape.iter().product();
        let raw = bytes
            .get(pos..pos + 4 * n)
            .ok_or_else(|| bad(&format!("truncated tensor {}", entry.name)))?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        tensors.push(Tensor::new(entry.shape.clone(), data)?);
        pos += 4 * n;
    }
    if pos != bytes.len() {
        return Err(bad("trailing bytes after the last tensor"));
    }
    Ok((header, tensors))
}

pub fn save<'a>(
    path: &Path,
    meta: &serde_json::Value,
    tensors: impl IntoIterator<Item = (String, &'a Tensor<f32>)>,
) -> Result<()> {
    let bytes = encode(meta, tensors)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<(CheckpointHeader, Vec<Tensor<f32>>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}
