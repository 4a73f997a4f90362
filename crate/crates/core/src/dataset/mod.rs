//! Labeled patch sets: nine compression-history variants of each source
//! image, tiled into 64x64 patches and split 90/5/5 by image.

mod build;
mod label;
mod patch;
mod source;
mod split;
mod store;
pub mod synth;

pub use build::{build_class_set, build_class_subset, hash_patch, image_variants, regenerate, DatasetManifest};
pub use label::{is_double_index, primary_qfs, CompressionLabel, CLASS_ORDER_ID, NUM_CLASSES};
pub use patch::{artifact_patches, extract_patches, reference_coefficients, tile_offsets, Patch, PATCH_SIZE};
pub use source::{open_source, DirectorySource, ImageSource, SyntheticSource};
pub use split::{split, Split, SplitAssignment};
pub use store::{load_store, DigestSink, DirectoryStore, MemoryStore, PatchSink, Tee};
