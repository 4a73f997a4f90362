//! Deterministic JPEG simulation: quantization tables, the 4:4:4 block DCT
//! codec, quality estimation from tables, and the `.jcoef` container.

mod artifact;
pub mod container;
mod dct;
mod image;
pub mod io;
mod tables;

pub use artifact::{compress, compress_with_tables, decompress, double_compress, Block, JpegArtifact};
pub use dct::{fdct, idct};
pub use image::RawImage;
pub use tables::{estimate_qf, tables_for_quality, QualityFactor, QuantTables, BASE_CHROMA, BASE_LUMA, ZIGZAG};
