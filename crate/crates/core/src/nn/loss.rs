use crate::dataset::{is_double_index, NUM_CLASSES};
use crate::error::{Error, Result};

use super::scalar::Scalar;

/// Probabilities below this are clamped before the logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Per-sample loss weights indexed `[true][predicted]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    w: [[f64; NUM_CLASSES]; NUM_CLASSES],
}

impl CostMatrix {
    pub fn new(w: [[f64; NUM_CLASSES]; NUM_CLASSES]) -> Result<Self> {
        if w.iter().flatten().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("cost matrix entries must be positive and finite"));
        }
        Ok(CostMatrix { w })
    }

    /// All weights 1: plain cross-entropy.
    pub fn uniform() -> Self {
        CostMatrix {
            w: [[1.0; NUM_CLASSES]; NUM_CLASSES],
        }
    }

    /// Confusing two different double-compression classes costs 1/9 of any
    /// other error.
    pub fn intra_double() -> Self {
        let mut w = [[1.0; NUM_CLASSES]; NUM_CLASSES];
        for (t, row) in w.iter_mut().enumerate() {
            for (p, v) in row.iter_mut().enumerate() {
                if t != p && is_double_index(t) && is_double_index(p) {
                    *v = 1.0 / 9.0;
                }
            }
        }
        CostMatrix { w }
    }

    pub fn get(&self, truth: usize, predicted: usize) -> f64 {
        self.w[truth][predicted]
    }
}

impl Default for CostMatrix {
    fn default() -> Self {
        Self::intra_double()
    }
}

/// Index of the largest entry, first on ties.
pub fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// `w * -ln(probs[label])` with `w = costs[label][argmax(probs)]`; returns
/// the loss and the weight.
pub fn weighted_cross_entropy<T: Scalar>(probs: &[T], label: usize, costs: &CostMatrix) -> (T, T) {
    let w = T::of(costs.get(label, argmax(probs)));
    let p = probs[label].max(T::of(PROB_FLOOR));
    (w * -p.ln(), w)
}

/// Gradient of the weighted loss w.r.t. the logits that produced `probs`,
/// holding the weight fixed.
pub fn softmax_ce_backward<T: Scalar>(probs: &[T], label: usize, weight: T) -> Vec<T> {
    probs
        .iter()
        .enumerate()
        .map(|(i, &p)| weight * if i == label { p - T::one() } else { p })
        .collect()
}
