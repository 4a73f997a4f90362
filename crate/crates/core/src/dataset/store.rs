use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::jpeg_sim::io::{read_image, write_png};
use crate::jpeg_sim::{container, QualityFactor};

use super::build::{hash_patch, DatasetManifest};
use super::label::CompressionLabel;
use super::patch::Patch;
use super::split::Split;

/// Receives patches from the dataset builder in canonical order.
pub trait PatchSink {
    fn accept(&mut self, split: Split, patch: Patch) -> Result<()>;
}

/// Keeps all patches in memory, grouped by split.
#[derive(Clone, Debug, Default)]
pub struct MemoryStore {
    train: Vec<Patch>,
    val: Vec<Patch>,
    test: Vec<Patch>,
}

impl MemoryStore {
    pub fn get(&self, split: Split) -> &[Patch] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn take(&mut self, split: Split) -> Vec<Patch> {
        std::mem::take(match split {
            Split::Train => &mut self.train,
            Split::Val => &mut self.val,
            Split::Test => &mut self.test,
        })
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl PatchSink for MemoryStore {
    fn accept(&mut self, split: Split, patch: Patch) -> Result<()> {
        match split {
            Split::Train => self.train.push(patch),
            Split::Val => self.val.push(patch),
            Split::Test => self.test.push(patch),
        }
        Ok(())
    }
}

/// Hashes patches without keeping them.
#[derive(Clone, Default)]
pub struct DigestSink {
    hasher: Sha256,
    counts: BTreeMap<(Split, String), usize>,
}

impl DigestSink {
    pub fn hex(&self) -> String {
        hex::encode(self.hasher.clone().finalize())
    }

    pub fn count(&self, split: Split, label: CompressionLabel) -> usize {
        self.counts.get(&(split, label.dir_name())).copied().unwrap_or(0)
    }
}

impl PatchSink for DigestSink {
    fn accept(&mut self, split: Split, patch: Patch) -> Result<()> {
        hash_patch(&mut self.hasher, split, &patch);
        *self.counts.entry((split, patch.label().dir_name())).or_default() += 1;
        Ok(())
    }
}

/// Sends each patch to two sinks.
pub struct Tee<'a>(pub &'a mut dyn PatchSink, pub &'a mut dyn PatchSink);

impl PatchSink for Tee<'_> {
    fn accept(&mut self, split: Split, patch: Patch) -> Result<()> {
        self.0.accept(split, patch.clone())?;
        self.1.accept(split, patch)
    }
}

/// On-disk patch store: `<root>/<qf2>/<class>/<id>_<row>_<col>.jcoef`, with
/// PNG tiles for the uncompressed class and `manifest.json` beside the class
/// directories.
#[derive(Debug)]
pub struct DirectoryStore {
    dir: PathBuf,
}

impl DirectoryStore {
    pub const MANIFEST: &'static str = "manifest.json";

    pub fn create(root: &Path, qf2: QualityFactor) -> Result<Self> {
        let dir = root.join(qf2.to_string());
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(DirectoryStore { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_manifest(&self, manifest: &DatasetManifest) -> Result<PathBuf> {
        let path = self.dir.join(Self::MANIFEST);
        manifest.save(&path)?;
        Ok(path)
    }
}

impl PatchSink for DirectoryStore {
    fn accept(&mut self, _split: Split, patch: Patch) -> Result<()> {
        let class_dir = self.dir.join(patch.label().dir_name());
        std::fs::create_dir_all(&class_dir).map_err(|e| Error::io(&class_dir, e))?;
        let (r, c) = patch.offset();
        let stem = format!("{}_{r}_{c}", patch.source_id());
        match patch.label() {
            CompressionLabel::Uncompressed => write_png(&class_dir.join(stem + ".png"), &patch.to_image()),
            _ => {
                let art = patch.coeffs().expect("compressed patches carry coefficients");
                container::save(art, &class_dir.join(stem + ".jcoef"))
            }
        }
    }
}

/// Reads a directory store written for `qf2` back into memory, in canonical
/// order.
pub fn load_store(root: &Path, qf2: QualityFactor) -> Result<(DatasetManifest, MemoryStore)> {
    let dir = root.join(qf2.to_string());
    let manifest = DatasetManifest::load(&dir.join(DirectoryStore::MANIFEST))?;
    let mut entries: BTreeMap<(String, usize, usize, usize), Patch> = BTreeMap::new();
    for &label in &manifest.classes {
        let index = label.index(qf2)?;
        let class_dir = dir.join(label.dir_name());
        let listing = std::fs::read_dir(&class_dir).map_err(|e| Error::io(&class_dir, e))?;
        for entry in listing {
            let path = entry.map_err(|e| Error::io(&class_dir, e))?.path();
            let (id, row, col) = parse_stem(&path)?;
            let patch = match label {
                CompressionLabel::Uncompressed => {
                    let img = read_image(&path)?;
                    Patch::uncompressed(img.into_samples(), id.clone(), (row, col))
                }
                _ => Patch::from_artifact(container::load(&path)?, id.clone(), (row, col), label),
            }
            .map_err(|e| Error::format(&path, e.to_string()))?;
            entries.insert((id, index, row, col), patch);
        }
    }
    let mut store = MemoryStore::default();
    for ((id, ..), patch) in entries {
        let split = *manifest
            .splits
            .get(&id)
            .ok_or_else(|| Error::format(&dir, format!("image {id} is not in the manifest")))?;
        store.accept(split, patch)?;
    }
    Ok((manifest, store))
}

fn parse_stem(path: &Path) -> Result<(String, usize, usize)> {
    let bad = || Error::format(path, "patch file name must be <id>_<row>_<col>");
    let stem = path.file_stem().and_then(|s| s.to_str()).ok_or_else(bad)?;
    let mut parts = stem.rsplitn(3, '_');
    let col = parts.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
    let row = parts.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
    let id = parts.next().filter(|s| !s.is_empty()).ok_or_else(bad)?;
    Ok((id.to_string(), row, col))
}
