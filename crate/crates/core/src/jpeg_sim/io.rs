//! Lossless raster input/output (PNG, TIFF) and the pluggable artifact reader.

use std::path::Path;

use crate::error::{Error, Result};

use super::artifact::JpegArtifact;
use super::container;
use super::image::RawImage;

/// Reads a PNG or TIFF file as 8-bit RGB.
pub fn read_image(path: &Path) -> Result<RawImage> {
    let img = image::open(path)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    RawImage::new(w, h, img.into_raw()).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_png(path: &Path, img: &RawImage) -> Result<()> {
    image::save_buffer_with_format(
        path,
        img.samples(),
        img.width() as u32,
        img.height() as u32,
        image::ExtendedColorType::Rgb8,
        image::ImageFormat::Png,
    )
    .map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Whether `path` has an extension this module can read as a lossless source.
pub fn is_lossless_image(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()),
        Some(ref e) if e == "png" || e == "tif" || e == "tiff"
    )
}

/// Source of quantized coefficients for inference.
///
/// The built-in reader handles `.jcoef` containers. Reading real JFIF files
/// needs an entropy decoder that exposes coefficients; plug one in here.
pub trait ArtifactReader {
    fn read_artifact(&self, path: &Path) -> Result<JpegArtifact>;
}

/// Reader for the `.jcoef` container.
#[derive(Debug, Default, Clone, Copy)]
pub struct ContainerReader;

impl ArtifactReader for ContainerReader {
    fn read_artifact(&self, path: &Path) -> Result<JpegArtifact> {
        container::load(path)
    }
}
