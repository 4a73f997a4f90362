use std::path::Path;

use crate::dataset::{is_double_index, PATCH_SIZE};
use crate::error::Result;
use crate::jpeg_sim::{io::write_png, RawImage};

use super::LocalizationMap;

/// Cell color of one window: red = P(Uncompressed), green = P(Single),
/// blue = total Double probability, each scaled to 0..=255.
pub fn mask_color(probs: &[f32]) -> [f64; 3] {
    let double: f64 = probs
        .iter()
        .enumerate()
        .filter(|(i, _)| is_double_index(*i))
        .map(|(_, &p)| p as f64)
        .sum();
    [255.0 * probs[0] as f64, 255.0 * probs[1] as f64, 255.0 * double]
}

/// Paints each window as a solid cell, averaging where windows overlap.
/// Pixels outside every window stay black.
pub fn render_mask(map: &LocalizationMap) -> RawImage {
    let (w, h) = (map.width, map.height);
    let mut acc = vec![[0f64; 3]; w * h];
    let mut hits = vec![0u32; w * h];
    for win in &map.windows {
        let color = mask_color(&win.probs);
        let (r0, c0) = win.offset;
        for y in r0..r0 + PATCH_SIZE {
            for x in c0..c0 + PATCH_SIZE {
                let i = y * w + x;
                for k in 0..3 {
                    acc[i][k] += color[k];
                }
                hits[i] += 1;
            }
        }
    }
    let mut samples = Vec::with_capacity(w * h * 3);
    for (sum, &n) in acc.iter().zip(&hits) {
        for v in sum {
            let avg = if n == 0 { 0.0 } else { v / n as f64 };
            samples.push(avg.round().clamp(0.0, 255.0) as u8);
        }
    }
    RawImage::new(w, h, samples).expect("map dimensions are valid")
}

/// Writes the mask PNG and the map as JSON.
pub fn save_mask(map: &LocalizationMap, png: &Path, json: &Path) -> Result<()> {
    write_png(png, &render_mask(map))?;
    map.save_json(json)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::CLASS_ORDER_ID;
    use crate::localize::WindowPrediction;
    use crate::models::ModelKind;

    fn map_with(stride: usize, width: usize, height: usize, probs: Vec<Vec<f32>>) -> LocalizationMap {
        let (rows, cols, offsets) = super::super::window_offsets(width, height, stride).unwrap();
        assert_eq!(offsets.len(), probs.len());
        LocalizationMap {
            width,
            height,
            stride,
            rows,
            cols,
            kind: ModelKind::Frequency,
            class_order: CLASS_ORDER_ID.into(),
            selection: None,
            windows: offsets
                .into_iter()
                .zip(probs)
                .map(|(offset, probs)| WindowPrediction {
                    offset,
                    class: 0,
                    probs,
                })
                .collect(),
        }
    }

    fn onehot(i: usize) -> Vec<f32> {
        let mut v = vec![0.0; 9];
        v[i] = 1.0;
        v
    }

    #[test]
    fn pure_cells() {
        let mut split = vec![0.0; 9];
        for p in split.iter_mut().skip(2) {
            *p = 1.0 / 7.0;
        }
        let map = map_with(64, 192, 64, vec![onehot(1), split, onehot(0)]);
        let img = render_mask(&map);
        assert_eq!(img.pixel(10, 10), [0, 255, 0]);
        assert_eq!(img.pixel(64 + 63, 63), [0, 0, 255]);
        assert_eq!(img.pixel(130, 0), [255, 0, 0]);
    }

    #[test]
    fn overlap_averages() {
        // 96 wide, stride 32: windows at col 0 and col 32 overlap on 32..64.
        let map = map_with(32, 96, 64, vec![onehot(1), onehot(4)]);
        let img = render_mask(&map);
        assert_eq!(img.pixel(0, 0), [0, 255, 0]);
        assert_eq!(img.pixel(40, 5), [0, 128, 128]);
        assert_eq!(img.pixel(95, 63), [0, 0, 255]);
    }

    #[test]
    fn uncovered_margin_is_black_and_render_is_stable() {
        let map = map_with(64, 100, 70, vec![onehot(1)]);
        let a = render_mask(&map);
        assert_eq!(a.pixel(80, 10), [0, 0, 0]);
        assert_eq!(a.pixel(10, 66), [0, 0, 0]);
        assert_eq!(a, render_mask(&map));
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2, j) = (
            dir.path().join("a.png"),
            dir.path().join("b.png"),
            dir.path().join("m.json"),
        );
        save_mask(&map, &p1, &j).unwrap();
        save_mask(&map, &p2, &j).unwrap();
        assert_eq!(std::fs::read(p1).unwrap(), std::fs::read(p2).unwrap());
    }
}
