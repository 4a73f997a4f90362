use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{CompressionLabel, Patch, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::features::dct_histograms;
use crate::jpeg_sim::QualityFactor;
use crate::models::{Inputs, Model};
use crate::nn::{
    argmax, ops, softmax_ce_backward, weighted_cross_entropy, AdaDelta, CostMatrix, Mode, Tensor, DEFAULT_EPS,
    DEFAULT_RHO,
};
use crate::seed::mix;

/// Samples per data-parallel work unit. Gradients of units are summed in
/// order, so results do not depend on the thread count.
pub const CHUNK: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub rho: f64,
    pub eps: f64,
    /// Use the intra-double cost matrix; plain cross-entropy otherwise.
    pub weighted_loss: bool,
    /// Class indices the training set must contain; all nine when `None`.
    pub required_classes: Option<Vec<usize>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            max_epochs: 50,
            patience: 5,
            seed: 0,
            rho: DEFAULT_RHO,
            eps: DEFAULT_EPS,
            weighted_loss: true,
            required_classes: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.patience == 0 || self.max_epochs == 0 {
            return Err(Error::invalid("batch size, patience and max epochs must be at least 1"));
        }
        Ok(())
    }

    pub fn costs(&self) -> CostMatrix {
        if self.weighted_loss {
            CostMatrix::intra_double()
        } else {
            CostMatrix::uniform()
        }
    }
}

/// Encoded inputs with a class index.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub inputs: Inputs,
    pub label: usize,
}

/// Encodes patches for `model`, computing DCT histograms where needed.
pub fn encode_patches(model: &Model, patches: &[Patch], qf2: QualityFactor) -> Result<Vec<Example>> {
    patches
        .par_iter()
        .map(|p| {
            let feature = if model.kind().uses_histogram() {
                Some(dct_histograms(p, qf2)?)
            } else {
                None
            };
            Ok(Example {
                inputs: model.encode(Some(p), feature.as_ref())?,
                label: p.label().index(qf2)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

impl History {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.epochs {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.get(self.best_epoch.checked_sub(1)?)
    }
}

/// Mean loss and accuracy of `model` on `examples`, dropout off.
pub fn loss_and_accuracy(model: &Model, examples: &[Example], costs: &CostMatrix) -> Result<(f64, f64)> {
    if examples.is_empty() {
        return Err(Error::invalid("cannot score an empty set"));
    }
    let inputs: Vec<Inputs> = examples.iter().map(|e| e.inputs.clone()).collect();
    let probs = model.predict_batch(&inputs)?;
    let mut loss = 0.0;
    let mut hits = 0usize;
    for (p, e) in probs.iter().zip(examples) {
        loss += weighted_cross_entropy(p, e.label, costs).0 as f64;
        hits += usize::from(argmax(p) == e.label);
    }
    let n = examples.len() as f64;
    Ok((loss / n, hits as f64 / n))
}

/// AdaDelta training with early stopping on the validation loss.
pub fn train(model: &mut Model, train: &[Example], val: &[Example], cfg: &TrainConfig) -> Result<History> {
    let costs = cfg.costs();
    train_with(model, train, cfg, |m, _| loss_and_accuracy(m, val, &costs))
}

/// Like [`train`] with a caller-supplied validation step returning
/// `(loss, accuracy)` for the given 1-based epoch.
pub fn train_with(
    model: &mut Model,
    train: &[Example],
    cfg: &TrainConfig,
    mut validate: impl FnMut(&Model, usize) -> Result<(f64, f64)>,
) -> Result<History> {
    cfg.validate()?;
    let required: Vec<usize> = cfg
        .required_classes
        .clone()
        .unwrap_or_else(|| (0..NUM_CLASSES).collect());
    let mut present = [false; NUM_CLASSES];
    for e in train {
        if e.label >= NUM_CLASSES {
            return Err(Error::invalid(format!("label {} out of range", e.label)));
        }
        present[e.label] = true;
    }
    let missing: Vec<usize> = required
        .into_iter()
        .filter(|&c| !present.get(c).copied().unwrap_or(false))
        .collect();
    if !missing.is_empty() {
        return Err(Error::invalid(format!("training set lacks classes {missing:?}")));
    }

    let costs = cfg.costs();
    let mut opt = AdaDelta::<f32>::new(cfg.rho, cfg.eps)?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(mix(&[cfg.seed, 0x5348_5546]));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = History::default();
    let mut best: Option<(f64, Vec<Tensor<f32>>)> = None;
    let mut since_best = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let scale = 1.0 / batch.len() as f32;
            let net = model.network();
            let parts: Vec<(Vec<Tensor<f32>>, f64)> = batch
                .par_chunks(CHUNK)
                .enumerate()
                .map(|(c, idx)| {
                    let seeds: Vec<u64> = (0..idx.len())
                        .map(|i| mix(&[cfg.seed, epoch as u64, (b * cfg.batch_size + c * CHUNK + i) as u64]))
                        .collect();
                    let stacked = model.stack(idx.iter().map(|&i| &train[i].inputs));
                    let refs: Vec<&[f32]> = stacked.iter().map(|v| v.as_slice()).collect();
                    let (logits, trace) = net.forward(&refs, idx.len(), Mode::Train { sample_seeds: &seeds })?;
                    let mut dlogits = Vec::with_capacity(logits.len());
                    let mut loss = 0.0;
                    for (z, &i) in logits.chunks(NUM_CLASSES).zip(idx) {
                        let p = ops::softmax(z);
                        let (l, w) = weighted_cross_entropy(&p, train[i].label, &costs);
                        loss += l as f64;
                        dlogits.extend(
                            softmax_ce_backward(&p, train[i].label, w)
                                .into_iter()
                                .map(|g| g * scale),
                        );
                    }
                    let mut grads = net.zero_grads();
                    net.backward(trace, dlogits, &mut grads);
                    Ok((grads, loss))
                })
                .collect::<Result<_>>()?;
            let mut parts = parts.into_iter();
            let (mut total, first_loss) = parts.next().expect("batch is non-empty");
            loss_sum += first_loss;
            for (g, l) in parts {
                loss_sum += l;
                for (t, u) in total.iter_mut().zip(&g) {
                    for (a, &v) in t.data_mut().iter_mut().zip(u.data()) {
                        *a += v;
                    }
                }
            }
            opt.step(model.network_mut().params_mut(), &total)?;
        }
        let (val_loss, val_acc) = validate(model, epoch)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len().max(1) as f64,
            val_loss,
            val_acc,
        });
        if best.as_ref().is_none_or(|(l, _)| val_loss < *l) {
            best = Some((val_loss, model.network().params().cloned().collect()));
            history.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    if let Some((_, params)) = best {
        model.set_params(params)?;
    }
    Ok(history)
}

/// Class indices of `labels` in the bank for `qf2`.
pub fn class_indices(labels: &[CompressionLabel], qf2: QualityFactor) -> Result<Vec<usize>> {
    labels.iter().map(|l| l.index(qf2)).collect()
}
