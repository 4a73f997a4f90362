//! DCT-histogram features for the frequency branch.
//!
//! For each of the first nine AC frequencies in zig-zag order, the quantized
//! luma coefficients of every 8x8 block are counted into 101 signed bins
//! (-50..=50, out-of-range values saturate into the end bins). Slices are
//! concatenated frequency-major and divided by the block count.

use std::io::Write;

use crate::dataset::Patch;
use crate::error::{Error, Result};
use crate::jpeg_sim::{compress, Block, QualityFactor, ZIGZAG};

pub const NUM_FREQUENCIES: usize = 9;
pub const BIN_RADIUS: i32 = 50;
pub const NUM_BINS: usize = 2 * BIN_RADIUS as usize + 1;
pub const FEATURE_LEN: usize = NUM_FREQUENCIES * NUM_BINS;

/// The 909-element histogram vector.
#[derive(Clone, Debug, PartialEq)]
pub struct DctFeature {
    values: Vec<f32>,
}

impl DctFeature {
    pub fn from_values(values: Vec<f32>) -> Result<Self> {
        if values.len() != FEATURE_LEN {
            return Err(Error::invalid(format!(
                "feature has {} values, expected {FEATURE_LEN}",
                values.len()
            )));
        }
        Ok(DctFeature { values })
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Value of bin `m` (-50..=50) of frequency slice `f`.
    pub fn bin(&self, f: usize, m: i32) -> f32 {
        self.values[f * NUM_BINS + (m + BIN_RADIUS) as usize]
    }
}

/// `(row, col)` positions 1..=9 of the JPEG zig-zag scan.
pub fn zigzag_positions() -> [(usize, usize); NUM_FREQUENCIES] {
    std::array::from_fn(|k| {
        let n = ZIGZAG[k + 1];
        (n / 8, n % 8)
    })
}

/// Un-normalized counts over the given luma blocks.
pub fn histogram_counts<'a>(blocks: impl IntoIterator<Item = &'a Block>) -> [u32; FEATURE_LEN] {
    let mut counts = [0u32; FEATURE_LEN];
    for block in blocks {
        for f in 0..NUM_FREQUENCIES {
            let v = block[ZIGZAG[f + 1]] as i32;
            let bin = v.clamp(-BIN_RADIUS, BIN_RADIUS) + BIN_RADIUS;
            counts[f * NUM_BINS + bin as usize] += 1;
        }
    }
    counts
}

/// Histogram feature of a set of luma blocks, normalized by block count.
pub fn histograms_from_blocks(blocks: &[Block]) -> Result<DctFeature> {
    if blocks.is_empty() {
        return Err(Error::invalid("no DCT blocks to histogram"));
    }
    let counts = histogram_counts(blocks);
    let n = blocks.len() as f32;
    Ok(DctFeature {
        values: counts.iter().map(|&c| c as f32 / n).collect(),
    })
}

/// Feature of a 64x64 patch. Uses the patch's coefficients when present;
/// otherwise compresses its pixels at `qf2` to obtain them.
pub fn dct_histograms(patch: &Patch, qf2: QualityFactor) -> Result<DctFeature> {
    match patch.coeffs() {
        Some(art) => histograms_from_blocks(art.channel(0)),
        None => {
            let art = compress(&patch.to_image(), qf2);
            histograms_from_blocks(art.channel(0))
        }
    }
}

/// Debug dump: one feature per line, comma-separated.
pub fn write_feature_dump<'a>(
    mut out: impl Write,
    features: impl IntoIterator<Item = &'a DctFeature>,
) -> std::io::Result<()> {
    for feat in features {
        let line: Vec<String> = feat.values.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}
