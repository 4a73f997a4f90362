use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::jpeg_sim::io::{is_lossless_image, read_image};
use crate::jpeg_sim::RawImage;

use super::synth::synthetic_image;

/// A named collection of lossless source images.
pub trait ImageSource: Sync {
    /// Image ids in ascending order.
    fn ids(&self) -> Vec<String>;
    fn load(&self, id: &str) -> Result<RawImage>;
    /// String that [`open_source`] turns back into an equivalent source.
    fn descriptor(&self) -> String;
}

/// PNG and TIFF files in one directory; ids are file stems.
#[derive(Debug, Clone)]
pub struct DirectorySource {
    dir: PathBuf,
    files: BTreeMap<String, PathBuf>,
}

impl DirectorySource {
    pub fn open(dir: &Path) -> Result<Self> {
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut files = BTreeMap::new();
        for entry in entries {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if !path.is_file() {
                continue;
            }
            let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
            if matches!(ext.as_deref(), Some("jpg" | "jpeg" | "jpe" | "jfif")) {
                return Err(Error::format(&path, "JPEG files cannot be dataset sources"));
            }
            if !is_lossless_image(&path) {
                continue;
            }
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| Error::format(&path, "file name is not UTF-8"))?
                .to_string();
            if let Some(prev) = files.insert(stem.clone(), path.clone()) {
                return Err(Error::format(
                    &path,
                    format!("image id {stem} also used by {}", prev.display()),
                ));
            }
        }
        Ok(DirectorySource {
            dir: dir.to_path_buf(),
            files,
        })
    }
}

impl ImageSource for DirectorySource {
    fn ids(&self) -> Vec<String> {
        self.files.keys().cloned().collect()
    }

    fn load(&self, id: &str) -> Result<RawImage> {
        let path = self
            .files
            .get(id)
            .ok_or_else(|| Error::invalid(format!("no image {id} in {}", self.dir.display())))?;
        read_image(path)
    }

    fn descriptor(&self) -> String {
        self.dir.display().to_string()
    }
}

/// The seeded synthetic corpus, `count` images of `width`x`height`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticSource {
    pub count: usize,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
}

impl SyntheticSource {
    const PREFIX: &'static str = "synthetic:";

    pub fn new(count: usize, width: usize, height: usize, seed: u64) -> Result<Self> {
        if width < RawImage::MIN_DIM || height < RawImage::MIN_DIM {
            return Err(Error::invalid("synthetic images must be at least 8x8"));
        }
        Ok(SyntheticSource {
            count,
            width,
            height,
            seed,
        })
    }

    fn parse(desc: &str) -> Result<Self> {
        let body = desc
            .strip_prefix(Self::PREFIX)
            .ok_or_else(|| Error::invalid(format!("not a synthetic descriptor: {desc}")))?;
        let mut fields = BTreeMap::new();
        for kv in body.split(',') {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("bad synthetic field {kv:?}")))?;
            let v: u64 = v
                .parse()
                .map_err(|_| Error::invalid(format!("bad synthetic value {kv:?}")))?;
            fields.insert(k, v);
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::invalid(format!("synthetic descriptor lacks {k}")))
        };
        Self::new(
            get("count")? as usize,
            get("width")? as usize,
            get("height")? as usize,
            get("seed")?,
        )
    }
}

impl ImageSource for SyntheticSource {
    fn ids(&self) -> Vec<String> {
        (0..self.count).map(|i| format!("syn{i:05}")).collect()
    }

    fn load(&self, id: &str) -> Result<RawImage> {
        let index = id
            .strip_prefix("syn")
            .and_then(|n| n.parse::<usize>().ok())
            .filter(|&i| i < self.count)
            .ok_or_else(|| Error::invalid(format!("no synthetic image {id}")))?;
        Ok(synthetic_image(self.seed, index, self.width, self.height))
    }

    fn descriptor(&self) -> String {
        format!(
            "{}count={},width={},height={},seed={}",
            Self::PREFIX,
            self.count,
            self.width,
            self.height,
            self.seed
        )
    }
}

/// Opens a directory path or a `synthetic:` descriptor.
pub fn open_source(descriptor: &str) -> Result<Box<dyn ImageSource>> {
    if descriptor.starts_with(SyntheticSource::PREFIX) {
        Ok(Box::new(SyntheticSource::parse(descriptor)?))
    } else {
        Ok(Box::new(DirectorySource::open(Path::new(descriptor))?))
    }
}
