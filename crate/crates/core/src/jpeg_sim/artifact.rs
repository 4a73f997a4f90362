//! Baseline 4:4:4 JPEG compression without entropy coding.
//!
//! The pipeline is RGB -> YCbCr (full-range BT.601, rounded), edge
//! replication to a multiple of 8, level shift by -128, 8x8 DCT and division
//! by the quantization table with half-away-from-zero rounding. Decoding runs
//! the inverse path in floating point and rounds and clamps only the final
//! RGB samples.

use crate::error::{Error, Result};

use super::dct::{fdct, idct};
use super::image::RawImage;
use super::tables::{tables_for_quality, QualityFactor, QuantTables};

/// Quantized DCT coefficients of one 8x8 block, natural order.
pub type Block = [i16; 64];

/// Quantized coefficients of an image plus the tables that produced them.
///
/// `decoded` always equals running the decoder on `coeffs`; it is filled at
/// construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JpegArtifact {
    width: usize,
    height: usize,
    tables: QuantTables,
    coeffs: [Vec<Block>; 3],
    decoded: RawImage,
}

fn blocks_for(extent: usize) -> usize {
    extent.div_ceil(8)
}

fn rgb_to_ycbcr(r: u8, g: u8, b: u8) -> [u8; 3] {
    let (r, g, b) = (r as f64, g as f64, b as f64);
    let y = 0.299 * r + 0.587 * g + 0.114 * b;
    let cb = -0.168_735_892 * r - 0.331_264_108 * g + 0.5 * b + 128.0;
    let cr = 0.5 * r - 0.418_687_589 * g - 0.081_312_411 * b + 128.0;
    [clamp_u8(y), clamp_u8(cb), clamp_u8(cr)]
}

fn ycbcr_to_rgb(y: f64, cb: f64, cr: f64) -> [u8; 3] {
    let (cb, cr) = (cb - 128.0, cr - 128.0);
    [
        clamp_u8(y + 1.402 * cr),
        clamp_u8(y - 0.344_136_286 * cb - 0.714_136_286 * cr),
        clamp_u8(y + 1.772 * cb),
    ]
}

fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Splits an image into three padded planes (Y, Cb, Cr), each
/// `bw*8` x `bh*8`, replicating the last row/column into the padding.
fn to_planes(img: &RawImage) -> ([Vec<u8>; 3], usize, usize) {
    let (w, h) = (img.width(), img.height());
    let (pw, ph) = (blocks_for(w) * 8, blocks_for(h) * 8);
    let mut planes = [vec![0u8; pw * ph], vec![0u8; pw * ph], vec![0u8; pw * ph]];
    for y in 0..ph {
        let sy = y.min(h - 1);
        for x in 0..pw {
            let sx = x.min(w - 1);
            let [r, g, b] = img.pixel(sx, sy);
            let ycc = rgb_to_ycbcr(r, g, b);
            for c in 0..3 {
                planes[c][y * pw + x] = ycc[c];
            }
        }
    }
    (planes, pw, ph)
}

fn forward_block(plane: &[u8], stride: usize, bx: usize, by: usize, table: &[u8; 64]) -> Block {
    let mut f = [0.0; 64];
    for y in 0..8 {
        for x in 0..8 {
            f[y * 8 + x] = plane[(by * 8 + y) * stride + bx * 8 + x] as f64 - 128.0;
        }
    }
    let d = fdct(&f);
    let mut out = [0i16; 64];
    for i in 0..64 {
        // f64::round rounds half away from zero.
        out[i] = (d[i] / table[i] as f64).round() as i16;
    }
    out
}

fn inverse_block(block: &Block, table: &[u8; 64]) -> [f64; 64] {
    let mut d = [0.0; 64];
    for i in 0..64 {
        d[i] = block[i] as f64 * table[i] as f64;
    }
    let mut f = idct(&d);
    for v in f.iter_mut() {
        *v += 128.0;
    }
    f
}

fn decode(width: usize, height: usize, tables: &QuantTables, coeffs: &[Vec<Block>; 3]) -> RawImage {
    let (bw, bh) = (blocks_for(width), blocks_for(height));
    let stride = bw * 8;
    let mut planes = [
        vec![0f64; stride * bh * 8],
        vec![0f64; stride * bh * 8],
        vec![0f64; stride * bh * 8],
    ];
    for (c, plane) in planes.iter_mut().enumerate() {
        let table = tables.for_channel(c);
        for by in 0..bh {
            for bx in 0..bw {
                let px = inverse_block(&coeffs[c][by * bw + bx], table);
                for y in 0..8 {
                    let row = (by * 8 + y) * stride + bx * 8;
                    plane[row..row + 8].copy_from_slice(&px[y * 8..y * 8 + 8]);
                }
            }
        }
    }
    let mut samples = Vec::with_capacity(width * height * 3);
    for y in 0..height {
        for x in 0..width {
            let i = y * stride + x;
            samples.extend_from_slice(&ycbcr_to_rgb(planes[0][i], planes[1][i], planes[2][i]));
        }
    }
    RawImage::new(width, height, samples).expect("decoded dimensions are valid")
}

impl JpegArtifact {
    /// Assembles an artifact from stored coefficients and decodes it.
    pub fn from_coefficients(
        width: usize,
        height: usize,
        tables: QuantTables,
        coeffs: [Vec<Block>; 3],
    ) -> Result<Self> {
        if width < RawImage::MIN_DIM || height < RawImage::MIN_DIM {
            return Err(Error::invalid(format!("artifact {width}x{height} too small")));
        }
        let n = blocks_for(width) * blocks_for(height);
        if coeffs.iter().any(|c| c.len() != n) {
            return Err(Error::invalid(format!(
                "expected {n} blocks per channel for {width}x{height}"
            )));
        }
        let decoded = decode(width, height, &tables, &coeffs);
        Ok(JpegArtifact {
            width,
            height,
            tables,
            coeffs,
            decoded,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn tables(&self) -> &QuantTables {
        &self.tables
    }

    /// Block-grid dimensions `(columns, rows)`.
    pub fn block_grid(&self) -> (usize, usize) {
        (blocks_for(self.width), blocks_for(self.height))
    }

    /// Raster-ordered blocks of channel `c` (0 = Y, 1 = Cb, 2 = Cr).
    pub fn channel(&self, c: usize) -> &[Block] {
        &self.coeffs[c]
    }

    pub fn block(&self, c: usize, bx: usize, by: usize) -> &Block {
        &self.coeffs[c][by * blocks_for(self.width) + bx]
    }

    pub fn decoded(&self) -> &RawImage {
        &self.decoded
    }

    /// Sub-artifact covering the pixel rectangle at (`x0`, `y0`).
    ///
    /// All four values must be multiples of 8 and the rectangle must lie in
    /// the unpadded image, so the cropped decode is the crop of the decode.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<JpegArtifact> {
        if [x0, y0, w, h].iter().any(|v| v % 8 != 0) || w == 0 || h == 0 {
            return Err(Error::invalid("artifact crops must be 8-aligned and non-empty"));
        }
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::invalid(format!(
                "crop {w}x{h}+{x0}+{y0} exceeds {}x{}",
                self.width, self.height
            )));
        }
        let bw = blocks_for(self.width);
        let coeffs: [Vec<Block>; 3] = std::array::from_fn(|c| {
            let mut out = Vec::with_capacity((w / 8) * (h / 8));
            for by in y0 / 8..(y0 + h) / 8 {
                out.extend_from_slice(&self.coeffs[c][by * bw + x0 / 8..by * bw + (x0 + w) / 8]);
            }
            out
        });
        let decoded = RawImage::new(w, h, self.decoded.crop(x0, y0, w, h))?;
        Ok(JpegArtifact {
            width: w,
            height: h,
            tables: self.tables.clone(),
            coeffs,
            decoded,
        })
    }
}

/// Compresses with explicit tables.
pub fn compress_with_tables(img: &RawImage, tables: &QuantTables) -> JpegArtifact {
    let (planes, pw, ph) = to_planes(img);
    let (bw, bh) = (pw / 8, ph / 8);
    let coeffs: [Vec<Block>; 3] = std::array::from_fn(|c| {
        let table = tables.for_channel(c);
        let mut blocks = Vec::with_capacity(bw * bh);
        for by in 0..bh {
            for bx in 0..bw {
                blocks.push(forward_block(&planes[c], pw, bx, by, table));
            }
        }
        blocks
    });
    let decoded = decode(img.width(), img.height(), tables, &coeffs);
    JpegArtifact {
        width: img.width(),
        height: img.height(),
        tables: tables.clone(),
        coeffs,
        decoded,
    }
}

pub fn compress(img: &RawImage, qf: QualityFactor) -> JpegArtifact {
    compress_with_tables(img, &tables_for_quality(qf))
}

/// Runs the decoder on the artifact's coefficients.
pub fn decompress(art: &JpegArtifact) -> RawImage {
    decode(art.width, art.height, &art.tables, &art.coeffs)
}

/// Compress at `qf1`, decode, recompress at `qf2`.
pub fn double_compress(img: &RawImage, qf1: QualityFactor, qf2: QualityFactor) -> JpegArtifact {
    let first = compress(img, qf1);
    compress(first.decoded(), qf2)
}
