use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::jpeg_sim::{compress, double_compress, QualityFactor, RawImage};

use super::label::{CompressionLabel, CLASS_ORDER_ID};
use super::patch::{artifact_patches, extract_patches, Patch, PATCH_SIZE};
use super::source::{open_source, ImageSource};
use super::split::{split, Split};
use super::store::PatchSink;

/// Images processed concurrently before their patches are handed, in order,
/// to the sink. Bounds peak memory.
const IMAGES_PER_WAVE: usize = 4;

/// Everything needed to regenerate a patch set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub source_dir: String,
    pub qf2: QualityFactor,
    pub seed: u64,
    pub patch_size: usize,
    pub class_order: String,
    /// Classes present, in class-index order.
    pub classes: Vec<CompressionLabel>,
    pub splits: BTreeMap<String, Split>,
    /// Patch counts per split and class directory name.
    pub counts: BTreeMap<Split, BTreeMap<String, usize>>,
    /// SHA-256 over all patches in canonical order.
    pub content_sha256: String,
}

impl DatasetManifest {
    /// Image ids assigned to `split`, ascending.
    pub fn ids(&self, split: Split) -> Vec<String> {
        self.splits
            .iter()
            .filter(|(_, &s)| s == split)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn count(&self, split: Split, label: CompressionLabel) -> usize {
        self.counts
            .get(&split)
            .and_then(|m| m.get(&label.dir_name()))
            .copied()
            .unwrap_or(0)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Builds all nine classes for `qf2`.
pub fn build_class_set(
    source: &dyn ImageSource,
    qf2: QualityFactor,
    seed: u64,
    sink: &mut dyn PatchSink,
) -> Result<DatasetManifest> {
    build_class_subset(source, qf2, seed, &CompressionLabel::all(qf2), sink)
}

/// Like [`build_class_set`] restricted to `classes`.
///
/// Images are split 90/5/5 by [`split`]; with fewer than three images every
/// image goes to training.
pub fn build_class_subset(
    source: &dyn ImageSource,
    qf2: QualityFactor,
    seed: u64,
    classes: &[CompressionLabel],
    sink: &mut dyn PatchSink,
) -> Result<DatasetManifest> {
    let ids = source.ids();
    if ids.is_empty() {
        return Err(Error::invalid("source list is empty"));
    }
    let classes = canonical_classes(classes, qf2)?;
    let splits: BTreeMap<String, Split> = if ids.len() < 3 {
        ids.iter().map(|id| (id.clone(), Split::Train)).collect()
    } else {
        let a = split(&ids, seed)?;
        Split::ALL
            .iter()
            .flat_map(|&s| a.get(s).iter().map(move |id| (id.clone(), s)))
            .collect()
    };
    let (counts, digest) = generate(source, qf2, &classes, &splits, sink)?;
    Ok(DatasetManifest {
        source_dir: source.descriptor(),
        qf2,
        seed,
        patch_size: PATCH_SIZE,
        class_order: CLASS_ORDER_ID.to_string(),
        classes,
        splits,
        counts,
        content_sha256: digest,
    })
}

/// Rebuilds the patches described by `manifest` into `sink` and checks that
/// they hash to the recorded digest.
pub fn regenerate(manifest: &DatasetManifest, sink: &mut dyn PatchSink) -> Result<()> {
    let source = open_source(&manifest.source_dir)?;
    let classes = canonical_classes(&manifest.classes, manifest.qf2)?;
    let (counts, digest) = generate(source.as_ref(), manifest.qf2, &classes, &manifest.splits, sink)?;
    if counts != manifest.counts || digest != manifest.content_sha256 {
        return Err(Error::invalid(format!(
            "regenerated patches differ from the manifest (digest {digest}, expected {})",
            manifest.content_sha256
        )));
    }
    Ok(())
}

/// Patches of every requested variant of one image: classes in index order,
/// tiles row-major within each class.
pub fn image_variants(
    img: &RawImage,
    source_id: &str,
    qf2: QualityFactor,
    classes: &[CompressionLabel],
) -> Result<Vec<Patch>> {
    let mut out = Vec::new();
    for &label in classes {
        match label {
            CompressionLabel::Uncompressed => {
                for tile in extract_patches(img, source_id) {
                    out.push(Patch::uncompressed(tile.pixels().to_vec(), source_id, tile.offset())?);
                }
            }
            CompressionLabel::Single => {
                out.extend(artifact_patches(&compress(img, qf2), source_id, label)?);
            }
            CompressionLabel::Double(qf1) => {
                out.extend(artifact_patches(&double_compress(img, qf1, qf2), source_id, label)?);
            }
        }
    }
    Ok(out)
}

fn canonical_classes(classes: &[CompressionLabel], qf2: QualityFactor) -> Result<Vec<CompressionLabel>> {
    if classes.is_empty() {
        return Err(Error::invalid("no classes requested"));
    }
    let mut indexed = classes
        .iter()
        .map(|&c| c.index(qf2).map(|i| (i, c)))
        .collect::<Result<Vec<_>>>()?;
    indexed.sort();
    indexed.dedup();
    Ok(indexed.into_iter().map(|(_, c)| c).collect())
}

type Counts = BTreeMap<Split, BTreeMap<String, usize>>;

fn generate(
    source: &dyn ImageSource,
    qf2: QualityFactor,
    classes: &[CompressionLabel],
    splits: &BTreeMap<String, Split>,
    sink: &mut dyn PatchSink,
) -> Result<(Counts, String)> {
    let ids: Vec<&String> = splits.keys().collect();
    let mut counts: Counts = BTreeMap::new();
    for &s in &Split::ALL {
        let per_class = classes.iter().map(|c| (c.dir_name(), 0)).collect();
        counts.insert(s, per_class);
    }
    let mut hasher = Sha256::new();
    for wave in ids.chunks(IMAGES_PER_WAVE) {
        let produced: Vec<Result<Vec<Patch>>> = wave
            .par_iter()
            .map(|id| {
                let img = source.load(id)?;
                image_variants(&img, id, qf2, classes)
            })
            .collect();
        for (id, patches) in wave.iter().zip(produced) {
            let split = splits[*id];
            for patch in patches? {
                hash_patch(&mut hasher, split, &patch);
                *counts
                    .get_mut(&split)
                    .and_then(|m| m.get_mut(&patch.label().dir_name()))
                    .expect("class registered") += 1;
                sink.accept(split, patch)?;
            }
        }
    }
    Ok((counts, hex::encode(hasher.finalize())))
}

/// Feeds a patch's identity, label, pixels and coefficients to `hasher`.
pub fn hash_patch(hasher: &mut Sha256, split: Split, patch: &Patch) {
    hasher.update([split as u8]);
    hasher.update(patch.source_id().as_bytes());
    hasher.update([0]);
    let (r, c) = patch.offset();
    hasher.update((r as u32).to_le_bytes());
    hasher.update((c as u32).to_le_bytes());
    hasher.update(patch.label().dir_name().as_bytes());
    hasher.update([0]);
    hasher.update(patch.pixels());
    if let Some(art) = patch.coeffs() {
        hasher.update(art.tables().luma());
        hasher.update(art.tables().chroma());
        let mut buf = Vec::with_capacity(64 * 64 * 2);
        for ch in 0..3 {
            buf.clear();
            for block in art.channel(ch) {
                for v in block {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
            hasher.update(&buf);
        }
    }
}
