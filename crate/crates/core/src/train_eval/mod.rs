//! Training with AdaDelta and validation-loss early stopping; confusion
//! matrices, per-class true positive rates and report files.

mod eval;
mod report;
mod train;

pub use eval::{evaluate, ConfusionMatrix, EvalReport, Predictor};
pub use report::{accuracy_chart_svg, summary_json, tpr_grid, write_reports, BankReports, ABSENT, UNDEFINED};
pub use train::{
    class_indices, encode_patches, loss_and_accuracy, train, train_with, EpochRecord, Example, History, TrainConfig,
    CHUNK,
};

use crate::jpeg_sim::QualityFactor;
use crate::models::ModelKind;
use crate::seed::mix;

/// Seed of the (kind, qf2) model of a bank, derived from the master seed.
pub fn bank_seed(master: u64, kind: ModelKind, qf2: QualityFactor) -> u64 {
    mix(&[master, kind as u64 + 1, qf2.value() as u64])
}
