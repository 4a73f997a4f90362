use crate::error::{Error, Result};

/// An 8-bit interleaved RGB raster.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RawImage {
    width: usize,
    height: usize,
    samples: Vec<u8>,
}

impl RawImage {
    /// Smallest accepted extent: one JPEG block.
    pub const MIN_DIM: usize = 8;

    pub fn new(width: usize, height: usize, samples: Vec<u8>) -> Result<Self> {
        if width < Self::MIN_DIM || height < Self::MIN_DIM {
            return Err(Error::invalid(format!("image {width}x{height} is smaller than 8x8")));
        }
        if samples.len() != width * height * 3 {
            return Err(Error::invalid(format!(
                "{} samples for a {width}x{height} RGB image",
                samples.len()
            )));
        }
        Ok(RawImage { width, height, samples })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let samples = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self::new(width, height, samples)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<u8> {
        self.samples
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.samples[i], self.samples[i + 1], self.samples[i + 2]]
    }

    /// Copy of the `w`x`h` region at (`x0`, `y0`). Panics if out of bounds.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Vec<u8> {
        assert!(x0 + w <= self.width && y0 + h <= self.height, "crop out of bounds");
        let mut out = Vec::with_capacity(w * h * 3);
        for y in y0..y0 + h {
            let start = (y * self.width + x0) * 3;
            out.extend_from_slice(&self.samples[start..start + w * 3]);
        }
        out
    }

    /// Overwrites the region at (`x0`, `y0`) with `w`x`h` RGB samples.
    pub fn paste(&mut self, x0: usize, y0: usize, w: usize, h: usize, src: &[u8]) {
        assert!(x0 + w <= self.width && y0 + h <= self.height, "paste out of bounds");
        assert_eq!(src.len(), w * h * 3);
        for row in 0..h {
            let dst = ((y0 + row) * self.width + x0) * 3;
            self.samples[dst..dst + w * 3].copy_from_slice(&src[row * w * 3..(row + 1) * w * 3]);
        }
    }

    /// Mean squared error against another image of the same size.
    pub fn mse(&self, other: &RawImage) -> f64 {
        assert_eq!((self.width, self.height), (other.width, other.height));
        let sum: f64 = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(&a, &b)| {
                let d = a as f64 - b as f64;
                d * d
            })
            .sum();
        sum / self.samples.len() as f64
    }

    pub fn psnr(&self, other: &RawImage) -> f64 {
        let mse = self.mse(other);
        if mse == 0.0 {
            f64::INFINITY
        } else {
            10.0 * (255.0 * 255.0 / mse).log10()
        }
    }
}
