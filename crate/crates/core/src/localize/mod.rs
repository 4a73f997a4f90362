//! Sliding-window localization of compression-history inconsistencies in a
//! suspect JPEG, mask rendering, synthetic splice forgeries and scoring.

mod forge;
mod render;
mod score;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{CompressionLabel, CLASS_ORDER_ID, NUM_CLASSES, PATCH_SIZE};
use crate::error::{Error, Result};
use crate::features::histograms_from_blocks;
use crate::jpeg_sim::{estimate_qf, JpegArtifact, QualityFactor};
use crate::models::{samples_chw, ClassifierBank, Inputs, Model, ModelKind};
use crate::nn::argmax;

pub use forge::{forge, ForgeMode, Forgery, TruthGrid};
pub use render::{mask_color, render_mask, save_mask};
pub use score::{score, window_truth, Category, LocalizationScore};

/// Strides accepted by [`scan`].
pub const STRIDES: [usize; 4] = [8, 16, 32, 64];

/// Estimates farther than this from every grid value raise a warning.
pub const SNAP_WARN_DISTANCE: u8 = 3;

/// Outcome of picking a bank member for an artifact.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    /// Quality estimated from the artifact's tables.
    pub raw_qf: QualityFactor,
    /// Grid value whose model was used.
    pub qf2: QualityFactor,
    pub warning: Option<String>,
}

/// Raw estimate and snapped grid value for an artifact.
pub fn select_qf2(art: &JpegArtifact) -> Selection {
    let raw_qf = estimate_qf(art.tables());
    let qf2 = raw_qf.snap_to_grid();
    let distance = raw_qf.value().abs_diff(qf2.value());
    let warning = (distance > SNAP_WARN_DISTANCE)
        .then(|| format!("estimated quality {raw_qf} is {distance} away from the nearest trained value {qf2}"));
    Selection { raw_qf, qf2, warning }
}

/// Model of `bank` matching the artifact's estimated secondary quality.
pub fn select_classifier<'a>(art: &JpegArtifact, bank: &'a ClassifierBank) -> Result<(Selection, &'a Model)> {
    let sel = select_qf2(art);
    let model = bank.get(sel.qf2).ok_or_else(|| {
        Error::invalid(format!(
            "the {} bank has no model for qf2={} (estimated {})",
            bank.kind(),
            sel.qf2,
            sel.raw_qf
        ))
    })?;
    Ok((sel, model))
}

/// One classified window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowPrediction {
    /// Top-left corner `(row, col)` in pixels.
    pub offset: (usize, usize),
    pub class: usize,
    pub probs: Vec<f32>,
}

/// Per-window predictions over a scanned image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationMap {
    pub width: usize,
    pub height: usize,
    pub stride: usize,
    pub rows: usize,
    pub cols: usize,
    pub kind: ModelKind,
    pub class_order: String,
    pub selection: Option<Selection>,
    /// Row-major over the window grid.
    pub windows: Vec<WindowPrediction>,
}

impl LocalizationMap {
    pub fn window(&self, row: usize, col: usize) -> &WindowPrediction {
        &self.windows[row * self.cols + col]
    }

    /// Label of a class index, when the bank quality is known.
    pub fn label(&self, class: usize) -> Option<CompressionLabel> {
        let qf2 = self.selection.as_ref()?.qf2;
        CompressionLabel::from_index(class, qf2).ok()
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let map: LocalizationMap = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        if map.windows.len() != map.rows * map.cols {
            return Err(Error::format(path, "window count does not match the grid"));
        }
        Ok(map)
    }
}

/// `(rows, cols, corners)` of a window scan.
pub type WindowGrid = (usize, usize, Vec<(usize, usize)>);

/// Window corners `(row, col)` of a scan, row-major, with the grid shape.
pub fn window_offsets(width: usize, height: usize, stride: usize) -> Result<WindowGrid> {
    if !STRIDES.contains(&stride) {
        return Err(Error::invalid(format!("stride {stride} is not one of {STRIDES:?}")));
    }
    if width < PATCH_SIZE || height < PATCH_SIZE {
        return Err(Error::invalid(format!(
            "image {width}x{height} is smaller than one {PATCH_SIZE}x{PATCH_SIZE} window"
        )));
    }
    let rows = (height - PATCH_SIZE) / stride + 1;
    let cols = (width - PATCH_SIZE) / stride + 1;
    let mut v = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            v.push((r * stride, c * stride));
        }
    }
    Ok((rows, cols, v))
}

/// Network inputs of the window at `offset`: decoded pixels and the
/// histogram of the artifact's own quantized coefficients.
pub fn window_inputs(art: &JpegArtifact, kind: ModelKind, offset: (usize, usize)) -> Result<Inputs> {
    let (r, c) = offset;
    let crop = art.crop(c, r, PATCH_SIZE, PATCH_SIZE)?;
    let mut inputs = Inputs::default();
    if kind.uses_pixels() {
        inputs.pixels = samples_chw(crop.decoded().samples());
    }
    if kind.uses_histogram() {
        inputs.histogram = histograms_from_blocks(crop.channel(0))?.values().to_vec();
    }
    Ok(inputs)
}

/// Classifies every window of `art` with `model`.
pub fn scan(art: &JpegArtifact, model: &Model, stride: usize) -> Result<LocalizationMap> {
    let (rows, cols, offsets) = window_offsets(art.width(), art.height(), stride)?;
    let kind = model.kind();
    let inputs: Vec<Inputs> = offsets
        .iter()
        .map(|&o| window_inputs(art, kind, o))
        .collect::<Result<_>>()?;
    let probs = model.predict_batch(&inputs)?;
    let windows = offsets
        .into_iter()
        .zip(probs)
        .map(|(offset, probs)| {
            debug_assert_eq!(probs.len(), NUM_CLASSES);
            WindowPrediction {
                offset,
                class: argmax(&probs),
                probs,
            }
        })
        .collect();
    Ok(LocalizationMap {
        width: art.width(),
        height: art.height(),
        stride,
        rows,
        cols,
        kind,
        class_order: CLASS_ORDER_ID.to_string(),
        selection: None,
        windows,
    })
}

/// Selects the bank member for `art` and scans with it.
pub fn localize(art: &JpegArtifact, bank: &ClassifierBank, stride: usize) -> Result<LocalizationMap> {
    let (sel, model) = select_classifier(art, bank)?;
    let mut map = scan(art, model, stride)?;
    map.selection = Some(sel);
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jpeg_sim::{compress, tables_for_quality, RawImage};
    use crate::models::ModelConfig;

    fn qf(v: u8) -> QualityFactor {
        QualityFactor::new(v).unwrap()
    }

    fn tiny(kind: ModelKind) -> Model {
        Model::build(&ModelConfig {
            kind,
            spatial_filters: [2, 2, 2, 2],
            frequency_filters: [2, 2],
            fc_width: 4,
            seed: 3,
            ..ModelConfig::default()
        })
        .unwrap()
    }

    fn gray_artifact(w: usize, h: usize, q: u8) -> JpegArtifact {
        compress(&RawImage::filled(w, h, [90, 120, 150]).unwrap(), qf(q))
    }

    #[test]
    fn window_counts() {
        assert_eq!(window_offsets(512, 384, 64).unwrap().2.len(), 48);
        assert_eq!(window_offsets(64, 64, 64).unwrap().2.len(), 1);
        let (rows, cols, _) = window_offsets(200, 136, 8).unwrap();
        // Brute-force count of aligned 64x64 windows that fit.
        let fit = |n: usize| (0..n).step_by(8).filter(|&o| o + 64 <= n).count();
        assert_eq!((rows, cols), (fit(136), fit(200)));
        assert!(window_offsets(128, 128, 12).is_err());
        assert!(window_offsets(128, 128, 4).is_err());
        assert!(window_offsets(56, 128, 8).is_err());
    }

    #[test]
    fn selection_snaps() {
        let s = select_qf2(&gray_artifact(64, 64, 90));
        assert_eq!((s.raw_qf, s.qf2, s.warning), (qf(90), qf(90), None));
        let s = select_qf2(&gray_artifact(64, 64, 88));
        assert_eq!((s.raw_qf, s.qf2), (qf(88), qf(90)));
        let art = compress(&RawImage::filled(64, 64, [0; 3]).unwrap(), qf(72));
        assert_eq!(estimate_qf(&tables_for_quality(qf(72))), qf(72));
        let s = select_qf2(&art);
        assert_eq!((s.raw_qf, s.qf2), (qf(72), qf(70)));
        assert!(s.warning.is_none());
        let s = select_qf2(&gray_artifact(64, 64, 40));
        assert_eq!(s.qf2, qf(60));
        assert!(s.warning.is_some());
    }

    #[test]
    fn missing_bank_member_is_an_error() {
        let mut bank = ClassifierBank::new(ModelKind::Frequency);
        bank.insert(qf(90), tiny(ModelKind::Frequency)).unwrap();
        assert!(select_classifier(&gray_artifact(64, 64, 91), &bank).is_ok());
        assert!(select_classifier(&gray_artifact(64, 64, 75), &bank).is_err());
    }

    #[test]
    fn scan_shape_and_probabilities() {
        let art = gray_artifact(192, 128, 90);
        for kind in ModelKind::ALL {
            let map = scan(&art, &tiny(kind), 32).unwrap();
            assert_eq!((map.rows, map.cols), (3, 5));
            assert_eq!(map.windows.len(), 15);
            assert_eq!(map.window(2, 4).offset, (64, 128));
            for w in &map.windows {
                let s: f32 = w.probs.iter().sum();
                assert!((s - 1.0).abs() < 1e-5);
                assert_eq!(w.class, argmax(&w.probs));
            }
        }
    }

    #[test]
    fn map_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut bank = ClassifierBank::new(ModelKind::Frequency);
        bank.insert(qf(90), tiny(ModelKind::Frequency)).unwrap();
        let map = localize(&gray_artifact(128, 64, 90), &bank, 64).unwrap();
        assert_eq!(map.label(1), Some(CompressionLabel::Single));
        let path = dir.path().join("map.json");
        map.save_json(&path).unwrap();
        assert_eq!(LocalizationMap::load_json(&path).unwrap(), map);
    }
}
