//! Seeded generator of photographic-like test images: smooth gradients,
//! multi-octave value noise, soft-edged shapes, occasional gratings and
//! sensor noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::jpeg_sim::RawImage;
use crate::seed::mix;

/// Deterministic image number `index` of the corpus identified by `seed`.
pub fn synthetic_image(seed: u64, index: usize, width: usize, height: usize) -> RawImage {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[seed, index as u64, 0x5157_4e54]));
    let n = width * height;
    let mut planes = [vec![0f32; n], vec![0f32; n], vec![0f32; n]];

    // Base color and linear gradient.
    let base: [f32; 3] = std::array::from_fn(|_| rng.gen_range(40.0..210.0));
    let theta: f32 = rng.gen_range(0.0..std::f32::consts::TAU);
    let slope: [f32; 3] = std::array::from_fn(|_| rng.gen_range(-90.0..90.0));
    let (dx, dy) = (theta.cos(), theta.sin());
    let diag = ((width * width + height * height) as f32).sqrt();
    for y in 0..height {
        for x in 0..width {
            let t = ((x as f32 - width as f32 / 2.0) * dx + (y as f32 - height as f32 / 2.0) * dy) / diag;
            for c in 0..3 {
                planes[c][y * width + x] = base[c] + slope[c] * t;
            }
        }
    }

    // Multi-octave value noise: a luminance field plus weaker per-channel tint.
    let amplitude: f32 = rng.gen_range(8.0..55.0);
    let roughness: f32 = rng.gen_range(0.4..1.1);
    let tint: [f32; 3] = std::array::from_fn(|_| rng.gen_range(0.7..1.3));
    for cell in [64usize, 32, 16, 8, 4, 2] {
        let amp = amplitude * (cell as f32 / 64.0).powf(roughness);
        let lum = value_noise(&mut rng, width, height, cell);
        for c in 0..3 {
            let chroma = value_noise(&mut rng, width, height, cell);
            for i in 0..n {
                planes[c][i] += amp * (tint[c] * lum[i] + 0.3 * chroma[i]);
            }
        }
    }

    // Soft-edged shapes.
    for _ in 0..rng.gen_range(1..7) {
        let color: [f32; 3] = std::array::from_fn(|_| rng.gen_range(0.0..255.0));
        let alpha: f32 = rng.gen_range(0.4..1.0);
        let softness: f32 = rng.gen_range(0.5..4.0);
        let shape = Shape::random(&mut rng, width, height);
        for y in 0..height {
            for x in 0..width {
                let d = shape.signed_distance(x as f32, y as f32);
                let cover = alpha * (0.5 - d / (2.0 * softness)).clamp(0.0, 1.0);
                if cover > 0.0 {
                    let i = y * width + x;
                    for c in 0..3 {
                        planes[c][i] = planes[c][i] * (1.0 - cover) + color[c] * cover;
                    }
                }
            }
        }
    }

    // Occasional fine grating (fabric, foliage-like periodic detail).
    if rng.gen_bool(0.35) {
        let period: f32 = rng.gen_range(2.5..14.0);
        let phi: f32 = rng.gen_range(0.0..std::f32::consts::TAU);
        let amp: f32 = rng.gen_range(4.0..25.0);
        let (gx, gy) = (phi.cos() / period, phi.sin() / period);
        for y in 0..height {
            for x in 0..width {
                let v = amp * (std::f32::consts::TAU * (x as f32 * gx + y as f32 * gy)).sin();
                for plane in planes.iter_mut() {
                    plane[y * width + x] += v;
                }
            }
        }
    }

    let sigma: f32 = rng.gen_range(0.3..3.0);
    let noise = Normal::new(0.0f32, sigma).expect("positive sigma");
    let mut samples = Vec::with_capacity(n * 3);
    for i in 0..n {
        for plane in &planes {
            let v = plane[i] + noise.sample(&mut rng);
            samples.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    RawImage::new(width, height, samples).expect("synthetic dimensions are valid")
}

/// Bilinearly interpolated lattice noise in [-1, 1] with lattice spacing `cell`.
fn value_noise(rng: &mut ChaCha8Rng, width: usize, height: usize, cell: usize) -> Vec<f32> {
    let gw = width / cell + 2;
    let gh = height / cell + 2;
    let lattice: Vec<f32> = (0..gw * gh).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let smooth = |t: f32| t * t * (3.0 - 2.0 * t);
    let mut out = vec![0f32; width * height];
    for y in 0..height {
        let gy = y / cell;
        let ty = smooth((y % cell) as f32 / cell as f32);
        for x in 0..width {
            let gx = x / cell;
            let tx = smooth((x % cell) as f32 / cell as f32);
            let a = lattice[gy * gw + gx];
            let b = lattice[gy * gw + gx + 1];
            let c = lattice[(gy + 1) * gw + gx];
            let d = lattice[(gy + 1) * gw + gx + 1];
            let top = a + (b - a) * tx;
            let bottom = c + (d - c) * tx;
            out[y * width + x] = top + (bottom - top) * ty;
        }
    }
    out
}

enum Shape {
    Disc { cx: f32, cy: f32, r: f32 },
    Rect { x0: f32, y0: f32, x1: f32, y1: f32 },
    HalfPlane { nx: f32, ny: f32, offset: f32 },
}

impl Shape {
    fn random(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Shape {
        let (w, h) = (w as f32, h as f32);
        match rng.gen_range(0..3) {
            0 => Shape::Disc {
                cx: rng.gen_range(0.0..w),
                cy: rng.gen_range(0.0..h),
                r: rng.gen_range(4.0..w.max(h) / 2.0),
            },
            1 => {
                let (xa, xb) = (rng.gen_range(0.0..w), rng.gen_range(0.0..w));
                let (ya, yb) = (rng.gen_range(0.0..h), rng.gen_range(0.0..h));
                Shape::Rect {
                    x0: xa.min(xb),
                    y0: ya.min(yb),
                    x1: xa.max(xb),
                    y1: ya.max(yb),
                }
            }
            _ => {
                let a: f32 = rng.gen_range(0.0..std::f32::consts::TAU);
                Shape::HalfPlane {
                    nx: a.cos(),
                    ny: a.sin(),
                    offset: rng.gen_range(0.0..w.max(h)),
                }
            }
        }
    }

    /// Negative inside.
    fn signed_distance(&self, x: f32, y: f32) -> f32 {
        match *self {
            Shape::Disc { cx, cy, r } => ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() - r,
            Shape::Rect { x0, y0, x1, y1 } => {
                let dx = (x0 - x).max(x - x1);
                let dy = (y0 - y).max(y - y1);
                dx.max(dy)
            }
            Shape::HalfPlane { nx, ny, offset } => x * nx + y * ny - offset,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_distinct() {
        let a = synthetic_image(7, 3, 96, 64);
        let b = synthetic_image(7, 3, 96, 64);
        let c = synthetic_image(7, 4, 96, 64);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!((a.width(), a.height()), (96, 64));
    }

    #[test]
    fn has_texture() {
        let img = synthetic_image(1, 0, 64, 64);
        let s = img.samples();
        let mean = s.iter().map(|&v| v as f64).sum::<f64>() / s.len() as f64;
        let var = s.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / s.len() as f64;
        assert!(var > 4.0);
    }
}
