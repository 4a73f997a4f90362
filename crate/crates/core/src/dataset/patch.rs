use crate::error::{Error, Result};
use crate::jpeg_sim::{compress, JpegArtifact, QualityFactor, RawImage};

use super::label::CompressionLabel;

/// Side length of a classification patch in pixels.
pub const PATCH_SIZE: usize = 64;

/// A 64x64 RGB tile with its provenance and compression label.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    pixels: Vec<u8>,
    source_id: String,
    offset: (usize, usize),
    label: CompressionLabel,
    coeffs: Option<JpegArtifact>,
}

impl Patch {
    /// `offset` is `(row, col)` in the source image; `coeffs`, when given,
    /// must be a 64x64 artifact.
    pub fn new(
        pixels: Vec<u8>,
        source_id: impl Into<String>,
        offset: (usize, usize),
        label: CompressionLabel,
        coeffs: Option<JpegArtifact>,
    ) -> Result<Self> {
        if pixels.len() != PATCH_SIZE * PATCH_SIZE * 3 {
            return Err(Error::invalid(format!(
                "patch has {} samples, expected {}",
                pixels.len(),
                PATCH_SIZE * PATCH_SIZE * 3
            )));
        }
        if let Some(art) = &coeffs {
            if art.width() != PATCH_SIZE || art.height() != PATCH_SIZE {
                return Err(Error::invalid("patch coefficients must cover 64x64 pixels"));
            }
        }
        Ok(Patch {
            pixels,
            source_id: source_id.into(),
            offset,
            label,
            coeffs,
        })
    }

    /// Patch of a JPEG artifact; pixels are the artifact's decode.
    pub fn from_artifact(
        art: JpegArtifact,
        source_id: impl Into<String>,
        offset: (usize, usize),
        label: CompressionLabel,
    ) -> Result<Self> {
        let pixels = art.decoded().samples().to_vec();
        Self::new(pixels, source_id, offset, label, Some(art))
    }

    /// Never-compressed patch. Its coefficients are the rounded, unquantized
    /// DCT of the pixels (unit quantization tables).
    pub fn uncompressed(pixels: Vec<u8>, source_id: impl Into<String>, offset: (usize, usize)) -> Result<Self> {
        let mut p = Self::new(pixels, source_id, offset, CompressionLabel::Uncompressed, None)?;
        p.coeffs = Some(reference_coefficients(&p.to_image()));
        Ok(p)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn offset(&self) -> (usize, usize) {
        self.offset
    }

    pub fn label(&self) -> CompressionLabel {
        self.label
    }

    pub fn coeffs(&self) -> Option<&JpegArtifact> {
        self.coeffs.as_ref()
    }

    pub fn to_image(&self) -> RawImage {
        RawImage::new(PATCH_SIZE, PATCH_SIZE, self.pixels.clone()).expect("patch is 64x64")
    }
}

/// Rounded DCT coefficients with unit tables, the coefficient view of an
/// image that has never been quantized.
pub fn reference_coefficients(img: &RawImage) -> JpegArtifact {
    compress(img, QualityFactor::new(100).expect("100 is a valid quality"))
}

/// Top-left corners `(row, col)` of all whole 64x64 tiles, row-major.
pub fn tile_offsets(width: usize, height: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for r in 0..height / PATCH_SIZE {
        for c in 0..width / PATCH_SIZE {
            v.push((r * PATCH_SIZE, c * PATCH_SIZE));
        }
    }
    v
}

/// Non-overlapping tiles of an image, labeled uncompressed and without
/// coefficients. Margins that do not fill a whole tile are dropped.
pub fn extract_patches(img: &RawImage, source_id: &str) -> Vec<Patch> {
    tile_offsets(img.width(), img.height())
        .into_iter()
        .map(|(r, c)| {
            let px = img.crop(c, r, PATCH_SIZE, PATCH_SIZE);
            Patch::new(px, source_id, (r, c), CompressionLabel::Uncompressed, None).expect("tile is 64x64")
        })
        .collect()
}

/// Tiles of a compressed image, each carrying its slice of coefficients.
pub fn artifact_patches(art: &JpegArtifact, source_id: &str, label: CompressionLabel) -> Result<Vec<Patch>> {
    tile_offsets(art.width(), art.height())
        .into_iter()
        .map(|(r, c)| {
            let sub = art.crop(c, r, PATCH_SIZE, PATCH_SIZE)?;
            Patch::from_artifact(sub, source_id, (r, c), label)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tile_counts() {
        let count = |w, h| extract_patches(&RawImage::filled(w, h, [0; 3]).unwrap(), "x").len();
        assert_eq!(count(512, 384), 48);
        assert_eq!(count(64, 64), 1);
        assert_eq!(count(130, 100), 2);
        assert_eq!(count(63, 200), 0);
    }

    #[test]
    fn tiles_are_row_major_and_aligned() {
        let img = RawImage::filled(192, 128, [9; 3]).unwrap();
        let offs: Vec<_> = extract_patches(&img, "x").iter().map(|p| p.offset()).collect();
        assert_eq!(offs, vec![(0, 0), (0, 64), (0, 128), (64, 0), (64, 64), (64, 128)]);
    }

    #[test]
    fn rejects_wrong_size() {
        assert!(Patch::new(vec![0; 10], "x", (0, 0), CompressionLabel::Single, None).is_err());
    }
}
