//! Detection of uncompressed, single- and double-JPEG-compressed image
//! patches, recovery of the primary quality factor, and sliding-window
//! localization of spliced regions.
//!
//! The pipeline: [`jpeg_sim`] synthesizes compressed data, [`dataset`] tiles
//! it into labeled 64x64 patches, [`features`] builds DCT histograms,
//! [`nn`] and [`models`] provide the spatial, frequency and multi-domain
//! networks, [`train_eval`] trains and scores classifier banks, and
//! [`localize`] scans suspect images.

pub mod dataset;
mod error;
pub mod features;
pub mod jpeg_sim;
pub mod localize;
pub mod models;
pub mod nn;
pub mod seed;
pub mod train_eval;

pub use error::{Error, Result};
