//! The `.jcoef` coefficient container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "JCF1"
//! u32 width, u32 height, u8 channel count (always 3)
//! 64 x u8 luma table, 64 x u8 chroma table     (zig-zag order)
//! per channel, per block in raster order: 64 x i16 (zig-zag order)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::artifact::{Block, JpegArtifact};
use super::tables::{QuantTables, ZIGZAG};

pub const MAGIC: &[u8; 4] = b"JCF1";

pub fn encode(art: &JpegArtifact) -> Vec<u8> {
    let (bw, bh) = art.block_grid();
    let mut out = Vec::with_capacity(4 + 9 + 128 + 3 * bw * bh * 128);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(art.width() as u32).to_le_bytes());
    out.extend_from_slice(&(art.height() as u32).to_le_bytes());
    out.push(3);
    for table in [art.tables().luma(), art.tables().chroma()] {
        out.extend(ZIGZAG.iter().map(|&n| table[n]));
    }
    for c in 0..3 {
        for block in art.channel(c) {
            for &n in &ZIGZAG {
                out.extend_from_slice(&block[n].to_le_bytes());
            }
        }
    }
    out
}

/// Parses a container; `origin` names the source in errors.
pub fn decode(bytes: &[u8], origin: &Path) -> Result<JpegArtifact> {
    let bad = |reason: &str| Error::format(origin, reason);
    if bytes.len() < 4 + 9 + 128 || &bytes[..4] != MAGIC {
        return Err(bad("missing JCF1 header"));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (width, height) = (u32_at(4), u32_at(8));
    if bytes[12] != 3 {
        return Err(bad("only 3-channel artifacts are supported"));
    }
    let mut luma = [0u8; 64];
    let mut chroma = [0u8; 64];
    for (k, &n) in ZIGZAG.iter().enumerate() {
        luma[n] = bytes[13 + k];
        chroma[n] = bytes[13 + 64 + k];
    }
    let tables = QuantTables::new(luma, chroma).map_err(|_| bad("zero quantization entry"))?;
    if width < 8 || height < 8 || width > 1 << 16 || height > 1 << 16 {
        return Err(bad("implausible dimensions"));
    }
    let blocks = width.div_ceil(8) * height.div_ceil(8);
    let body = &bytes[13 + 128..];
    if body.len() != 3 * blocks * 128 {
        return Err(bad(&format!(
            "expected {} coefficient bytes, found {}",
            3 * blocks * 128,
            body.len()
        )));
    }
    let mut chunks = body.chunks_exact(128);
    let coeffs: [Vec<Block>; 3] = std::array::from_fn(|_| {
        (0..blocks)
            .map(|_| {
                let raw = chunks.next().expect("length checked");
                let mut block = [0i16; 64];
                for (k, &n) in ZIGZAG.iter().enumerate() {
                    block[n] = i16::from_le_bytes([raw[2 * k], raw[2 * k + 1]]);
                }
                block
            })
            .collect()
    });
    JpegArtifact::from_coefficients(width, height, tables, coeffs).map_err(|e| bad(&e.to_string()))
}

pub fn write_to(art: &JpegArtifact, mut w: impl Write) -> std::io::Result<()> {
    w.write_all(&encode(art))
}

pub fn read_from(mut r: impl Read, origin: &Path) -> Result<JpegArtifact> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::io(origin, e))?;
    decode(&bytes, origin)
}

pub fn save(art: &JpegArtifact, path: &Path) -> Result<()> {
    std::fs::write(path, encode(art)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<JpegArtifact> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}
