//! The spatial, frequency and multi-domain classifiers, and banks of them
//! indexed by the second quality factor.
//!
//! Spatial: 3x64x64 pixels in [0,1] through two conv-conv-pool blocks and a
//! 256-unit dense layer. Frequency: the 909-bin histogram through two
//! conv1d-pool stages and three 256-unit dense layers. Multi-domain: both
//! trunks up to their first dense layer, concatenated to 512 units.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Patch, CLASS_ORDER_ID, NUM_CLASSES, PATCH_SIZE};
use crate::error::{Error, Result};
use crate::features::{DctFeature, FEATURE_LEN};
use crate::jpeg_sim::QualityFactor;
use crate::nn::{checkpoint, ops, LayerSpec, Network, Sequential, Tensor};

/// Samples per forward call when predicting many inputs.
pub const PREDICT_CHUNK: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Spatial,
    Frequency,
    MultiDomain,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Spatial, ModelKind::Frequency, ModelKind::MultiDomain];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Spatial => "spatial",
            ModelKind::Frequency => "frequency",
            ModelKind::MultiDomain => "multidomain",
        }
    }

    pub fn uses_pixels(self) -> bool {
        self != ModelKind::Frequency
    }

    pub fn uses_histogram(self) -> bool {
        self != ModelKind::Spatial
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown model kind {s:?}")))
    }
}

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Filters of the four 3x3 convolutions of the spatial trunk.
    pub spatial_filters: [usize; 4],
    pub spatial_kernel: usize,
    /// Filters of the two 1-D convolutions of the frequency trunk.
    pub frequency_filters: [usize; 2],
    pub frequency_kernel: usize,
    pub fc_width: usize,
    pub dropout: f64,
    /// Fuse trunk outputs before their ReLU instead of after.
    pub fuse_pre_activation: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: ModelKind::MultiDomain,
            spatial_filters: [32, 32, 64, 64],
            spatial_kernel: 3,
            frequency_filters: [32, 64],
            frequency_kernel: 5,
            fc_width: 256,
            dropout: 0.5,
            fuse_pre_activation: false,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn new(kind: ModelKind) -> Self {
        ModelConfig {
            kind,
            ..Self::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    fn spatial_trunk(&self, final_relu: bool) -> Vec<LayerSpec> {
        let [a, b, c, d] = self.spatial_filters;
        let k = self.spatial_kernel;
        let mut v = vec![
            LayerSpec::Conv2d { filters: a, kernel: k },
            LayerSpec::Relu,
            LayerSpec::Conv2d { filters: b, kernel: k },
            LayerSpec::Relu,
            LayerSpec::MaxPool2d,
            LayerSpec::Conv2d { filters: c, kernel: k },
            LayerSpec::Relu,
            LayerSpec::Conv2d { filters: d, kernel: k },
            LayerSpec::Relu,
            LayerSpec::MaxPool2d,
            LayerSpec::Flatten,
            LayerSpec::Dense { units: self.fc_width },
        ];
        if final_relu {
            v.push(LayerSpec::Relu);
        }
        v
    }

    fn frequency_trunk(&self, final_relu: bool) -> Vec<LayerSpec> {
        let [a, b] = self.frequency_filters;
        let k = self.frequency_kernel;
        let mut v = vec![
            LayerSpec::Conv1d { filters: a, kernel: k },
            LayerSpec::Relu,
            LayerSpec::MaxPool1d { floor: true },
            LayerSpec::Conv1d { filters: b, kernel: k },
            LayerSpec::Relu,
            LayerSpec::MaxPool1d { floor: true },
            LayerSpec::Flatten,
            LayerSpec::Dense { units: self.fc_width },
        ];
        if final_relu {
            v.push(LayerSpec::Relu);
        }
        v
    }

    fn network(&self) -> Result<Network<f32>> {
        let w = self.fc_width;
        let p = self.dropout;
        let pixel_shape = [3, PATCH_SIZE, PATCH_SIZE];
        let hist_shape = [1, FEATURE_LEN];
        let out = LayerSpec::Dense { units: NUM_CLASSES };
        let (trunks, head) = match self.kind {
            ModelKind::Spatial => (
                vec![Sequential::new(&pixel_shape, self.spatial_trunk(true))?],
                Sequential::new(&[w], vec![LayerSpec::Dropout { p }, out])?,
            ),
            ModelKind::Frequency => (
                vec![Sequential::new(&hist_shape, self.frequency_trunk(true))?],
                Sequential::new(
                    &[w],
                    vec![
                        LayerSpec::Dropout { p },
                        LayerSpec::Dense { units: w },
                        LayerSpec::Relu,
                        LayerSpec::Dropout { p },
                        LayerSpec::Dense { units: w },
                        LayerSpec::Relu,
                        out,
                    ],
                )?,
            ),
            ModelKind::MultiDomain => {
                let post = !self.fuse_pre_activation;
                (
                    vec![
                        Sequential::new(&pixel_shape, self.spatial_trunk(post))?,
                        Sequential::new(&hist_shape, self.frequency_trunk(post))?,
                    ],
                    Sequential::new(&[2 * w], vec![LayerSpec::Dropout { p }, out])?,
                )
            }
        };
        Network::new(trunks, head)
    }
}

/// Network-ready arrays for one sample; unused modalities are empty.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Inputs {
    pub pixels: Vec<f32>,
    pub histogram: Vec<f32>,
}

/// Channel-major pixels scaled to [0, 1].
pub fn pixels_chw(patch: &Patch) -> Vec<f32> {
    samples_chw(patch.pixels())
}

/// [`pixels_chw`] for interleaved RGB samples of a 64x64 tile.
pub fn samples_chw(px: &[u8]) -> Vec<f32> {
    let n = PATCH_SIZE * PATCH_SIZE;
    let mut out = vec![0f32; 3 * n];
    for i in 0..n {
        for c in 0..3 {
            out[c * n + i] = px[3 * i + c] as f32 / 255.0;
        }
    }
    out
}

/// A classifier with its configuration.
#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    net: Network<f32>,
}

impl Model {
    /// Fresh model with seeded He-uniform weights.
    pub fn build(config: &ModelConfig) -> Result<Self> {
        if config.fc_width == 0 || config.spatial_filters.contains(&0) || config.frequency_filters.contains(&0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        let mut net = config.network()?;
        net.init(config.seed);
        Ok(Model {
            config: config.clone(),
            net,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.config.kind
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn network(&self) -> &Network<f32> {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Network<f32> {
        &mut self.net
    }

    /// Prepares the inputs this model consumes.
    pub fn encode(&self, patch: Option<&Patch>, feature: Option<&DctFeature>) -> Result<Inputs> {
        let kind = self.kind();
        let mut inputs = Inputs::default();
        if kind.uses_pixels() {
            let p = patch.ok_or_else(|| Error::invalid(format!("{kind} model needs pixels")))?;
            inputs.pixels = pixels_chw(p);
        }
        if kind.uses_histogram() {
            let f = feature.ok_or_else(|| Error::invalid(format!("{kind} model needs a DCT histogram")))?;
            inputs.histogram = f.values().to_vec();
        }
        Ok(inputs)
    }

    /// Stacks a batch into per-trunk input buffers.
    pub fn stack<'a>(&self, batch: impl IntoIterator<Item = &'a Inputs>) -> Vec<Vec<f32>> {
        let kind = self.kind();
        let mut px = Vec::new();
        let mut hist = Vec::new();
        for s in batch {
            if kind.uses_pixels() {
                px.extend_from_slice(&s.pixels);
            }
            if kind.uses_histogram() {
                hist.extend_from_slice(&s.histogram);
            }
        }
        match kind {
            ModelKind::Spatial => vec![px],
            ModelKind::Frequency => vec![hist],
            ModelKind::MultiDomain => vec![px, hist],
        }
    }

    /// Class probabilities for one sample.
    pub fn predict(&self, patch: Option<&Patch>, feature: Option<&DctFeature>) -> Result<Vec<f32>> {
        let inputs = self.encode(patch, feature)?;
        Ok(self.predict_batch(std::slice::from_ref(&inputs))?.remove(0))
    }

    /// Class probabilities for many samples, evaluated in parallel chunks.
    pub fn predict_batch(&self, samples: &[Inputs]) -> Result<Vec<Vec<f32>>> {
        let chunks: Vec<Result<Vec<Vec<f32>>>> = samples
            .par_chunks(PREDICT_CHUNK)
            .map(|chunk| {
                let stacked = self.stack(chunk);
                let refs: Vec<&[f32]> = stacked.iter().map(|v| v.as_slice()).collect();
                let logits = self.net.forward_eval(&refs, chunk.len())?;
                Ok(logits.chunks(NUM_CLASSES).map(ops::softmax).collect())
            })
            .collect();
        let mut out = Vec::with_capacity(samples.len());
        for c in chunks {
            out.extend(c?);
        }
        Ok(out)
    }

    /// Writes a checkpoint; `extra` is stored alongside the configuration.
    pub fn save(&self, path: &Path, extra: serde_json::Value) -> Result<()> {
        let meta = serde_json::json!({
            "config": self.config,
            "class_order": CLASS_ORDER_ID,
            "extra": extra,
        });
        checkpoint::save(path, &meta, self.net.param_names().into_iter().zip(self.net.params()))
    }

    /// Reads a checkpoint; returns the model and its `extra` metadata.
    pub fn load(path: &Path) -> Result<(Model, serde_json::Value)> {
        let (header, tensors) = checkpoint::load(path)?;
        let bad = |r: String| Error::format(path, r);
        if header.meta.get("class_order").and_then(|v| v.as_str()) != Some(CLASS_ORDER_ID) {
            return Err(bad("checkpoint uses a different class order".into()));
        }
        let config: ModelConfig =
            serde_json::from_value(header.meta["config"].clone()).map_err(|e| bad(format!("bad model config: {e}")))?;
        let mut model = Model::build(&config)?;
        let names = model.net.param_names();
        let stored: Vec<&str> = header.tensors.iter().map(|t| t.name.as_str()).collect();
        if names.iter().map(String::as_str).collect::<Vec<_>>() != stored {
            return Err(bad("parameter names do not match the configuration".into()));
        }
        for (p, t) in model.net.params_mut().zip(tensors) {
            if p.shape() != t.shape() {
                return Err(bad(format!("shape {:?} where {:?} expected", t.shape(), p.shape())));
            }
            *p = t;
        }
        let extra = header.meta.get("extra").cloned().unwrap_or(serde_json::Value::Null);
        Ok((model, extra))
    }

    /// Replaces all parameters (e.g. the best epoch's snapshot).
    pub fn set_params(&mut self, params: Vec<Tensor<f32>>) -> Result<()> {
        let current: Vec<&mut Tensor<f32>> = self.net.params_mut().collect();
        if current.len() != params.len() {
            return Err(Error::invalid("parameter count mismatch"));
        }
        for (p, t) in current.into_iter().zip(params) {
            if p.shape() != t.shape() {
                return Err(Error::invalid("parameter shape mismatch"));
            }
            *p = t;
        }
        Ok(())
    }
}

pub fn build_spatial() -> Result<Model> {
    Model::build(&ModelConfig::new(ModelKind::Spatial))
}

pub fn build_frequency() -> Result<Model> {
    Model::build(&ModelConfig::new(ModelKind::Frequency))
}

pub fn build_multidomain() -> Result<Model> {
    Model::build(&ModelConfig::new(ModelKind::MultiDomain))
}

/// Models of one kind keyed by the second quality factor they were trained
/// for. A complete bank has one model per grid value.
#[derive(Clone, Debug)]
pub struct ClassifierBank {
    kind: ModelKind,
    models: BTreeMap<QualityFactor, Model>,
}

impl ClassifierBank {
    pub fn new(kind: ModelKind) -> Self {
        ClassifierBank {
            kind,
            models: BTreeMap::new(),
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn insert(&mut self, qf2: QualityFactor, model: Model) -> Result<()> {
        if !qf2.is_grid() {
            return Err(Error::invalid(format!("bank entries need a grid qf2, got {qf2}")));
        }
        if model.kind() != self.kind {
            return Err(Error::invalid(format!(
                "cannot add a {} model to a {} bank",
                model.kind(),
                self.kind
            )));
        }
        self.models.insert(qf2, model);
        Ok(())
    }

    pub fn get(&self, qf2: QualityFactor) -> Option<&Model> {
        self.models.get(&qf2)
    }

    pub fn qfs(&self) -> Vec<QualityFactor> {
        self.models.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        QualityFactor::GRID.iter().all(|q| self.models.contains_key(q))
    }

    /// `<dir>/<kind>_q<qf2>.nnck`
    pub fn checkpoint_path(dir: &Path, kind: ModelKind, qf2: QualityFactor) -> PathBuf {
        dir.join(format!("{kind}_q{qf2}.nnck"))
    }

    /// Loads every checkpoint of `kind` present in `dir`.
    pub fn load_dir(dir: &Path, kind: ModelKind) -> Result<Self> {
        let mut bank = ClassifierBank::new(kind);
        for qf2 in QualityFactor::GRID {
            let path = Self::checkpoint_path(dir, kind, qf2);
            if path.is_file() {
                bank.insert(qf2, Model::load(&path)?.0)?;
            }
        }
        if bank.is_empty() {
            return Err(Error::invalid(format!("no {kind} checkpoints in {}", dir.display())));
        }
        Ok(bank)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::CompressionLabel;
    use crate::features::dct_histograms;
    use crate::jpeg_sim::RawImage;

    fn small(kind: ModelKind) -> ModelConfig {
        ModelConfig {
            kind,
            spatial_filters: [4, 4, 8, 8],
            frequency_filters: [4, 8],
            fc_width: 16,
            seed: 3,
            ..ModelConfig::default()
        }
    }

    fn sample() -> (Patch, DctFeature) {
        let img = crate::dataset::synth::synthetic_image(1, 0, 64, 64);
        let p = Patch::new(img.into_samples(), "s", (0, 0), CompressionLabel::Single, None).unwrap();
        let f = dct_histograms(&p, QualityFactor::new(90).unwrap()).unwrap();
        (p, f)
    }

    #[test]
    fn spatial_shape_trace() {
        let net = ModelConfig::new(ModelKind::Spatial).network().unwrap();
        let extents: Vec<usize> = net.trunks()[0].shapes()[..11]
            .iter()
            .filter(|s| s.len() == 3)
            .map(|s| s[1])
            .collect();
        // input, conv, relu, conv, relu, pool, conv, relu, conv, relu, pool
        assert_eq!(extents, vec![64, 62, 62, 60, 60, 30, 28, 28, 26, 26, 13]);
        assert_eq!(net.trunks()[0].output_len(), 256);
        assert_eq!(net.num_classes(), 9);
    }

    #[test]
    fn frequency_dimensions() {
        let net = ModelConfig::new(ModelKind::Frequency).network().unwrap();
        let t = &net.trunks()[0];
        assert_eq!(t.input_len(), 909);
        assert_eq!(t.output_len(), 256);
        assert_eq!(t.shapes()[6], vec![64, 224]);
        assert_eq!(net.num_classes(), 9);
    }

    #[test]
    fn fusion_head_size() {
        let net = ModelConfig::new(ModelKind::MultiDomain).network().unwrap();
        assert_eq!(net.head().input_len(), 512);
        let head_params: usize = net.head().params().iter().map(|t| t.len()).sum();
        assert_eq!(head_params, 512 * 9 + 9);
        assert_eq!(head_params, 4617);
    }

    #[test]
    fn predictions_are_distributions_and_deterministic() {
        let (p, f) = sample();
        for kind in ModelKind::ALL {
            let m = Model::build(&small(kind)).unwrap();
            let a = m.predict(Some(&p), Some(&f)).unwrap();
            assert_eq!(a.len(), 9);
            assert!(a.iter().all(|v| v.is_finite() && *v >= 0.0));
            assert!((a.iter().sum::<f32>() - 1.0).abs() < 1e-5);
            assert_eq!(a, m.predict(Some(&p), Some(&f)).unwrap());
        }
    }

    #[test]
    fn missing_modality_rejected() {
        let (p, f) = sample();
        let spatial = Model::build(&small(ModelKind::Spatial)).unwrap();
        assert!(spatial.predict(None, Some(&f)).is_err());
        let freq = Model::build(&small(ModelKind::Frequency)).unwrap();
        assert!(freq.predict(Some(&p), None).is_err());
        let multi = Model::build(&small(ModelKind::MultiDomain)).unwrap();
        assert!(multi.predict(Some(&p), None).is_err());
    }

    #[test]
    fn zeroed_frequency_trunk_isolates_pixels() {
        let (p, f) = sample();
        let mut m = Model::build(&small(ModelKind::MultiDomain)).unwrap();
        for t in m.network_mut().trunks_mut()[1].params_mut() {
            t.fill(0.0);
        }
        let base = m.predict(Some(&p), Some(&f)).unwrap();
        let mut other = f.values().to_vec();
        other.reverse();
        let f2 = DctFeature::from_values(other).unwrap();
        assert_eq!(base, m.predict(Some(&p), Some(&f2)).unwrap());
        let flat = RawImage::filled(64, 64, [30; 3]).unwrap();
        let p2 = Patch::new(flat.into_samples(), "s", (0, 0), CompressionLabel::Single, None).unwrap();
        assert_ne!(base, m.predict(Some(&p2), Some(&f)).unwrap());
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (p, f) = sample();
        let m = Model::build(&small(ModelKind::MultiDomain)).unwrap();
        let path = ClassifierBank::checkpoint_path(dir.path(), ModelKind::MultiDomain, QualityFactor::new(90).unwrap());
        m.save(&path, serde_json::json!({"epoch": 2})).unwrap();
        let (back, extra) = Model::load(&path).unwrap();
        assert_eq!(extra["epoch"], 2);
        assert_eq!(back.config(), m.config());
        assert_eq!(
            back.predict(Some(&p), Some(&f)).unwrap(),
            m.predict(Some(&p), Some(&f)).unwrap()
        );
        let bank = ClassifierBank::load_dir(dir.path(), ModelKind::MultiDomain).unwrap();
        assert_eq!(bank.qfs(), vec![QualityFactor::new(90).unwrap()]);
        assert!(!bank.is_complete());
        assert!(ClassifierBank::load_dir(dir.path(), ModelKind::Spatial).is_err());
    }

    #[test]
    fn bank_rejects_mixed_kinds() {
        let mut bank = ClassifierBank::new(ModelKind::Frequency);
        let m = Model::build(&small(ModelKind::Spatial)).unwrap();
        assert!(bank.insert(QualityFactor::new(90).unwrap(), m.clone()).is_err());
        let f = Model::build(&small(ModelKind::Frequency)).unwrap();
        assert!(bank.insert(QualityFactor::new(88).unwrap(), f).is_err());
    }

    #[test]
    fn config_json_defaults() {
        let c: ModelConfig = serde_json::from_str(r#"{"kind":"spatial","fc_width":64}"#).unwrap();
        assert_eq!(c.kind, ModelKind::Spatial);
        assert_eq!(c.fc_width, 64);
        assert_eq!(c.spatial_filters, [32, 32, 64, 64]);
        assert_eq!("multidomain".parse::<ModelKind>().unwrap(), ModelKind::MultiDomain);
    }
}
