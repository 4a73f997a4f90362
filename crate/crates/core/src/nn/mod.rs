//! Minimal neural-network engine: batched layer kernels with exact
//! backward passes, cost-weighted cross-entropy, AdaDelta, and checkpoints.

pub mod checkpoint;
pub mod gradcheck;
mod layer;
mod loss;
pub mod ops;
mod optim;
mod scalar;
mod tensor;

pub use layer::{LayerSpec, Mode, NetTrace, Network, Sequential, Trace};
pub use loss::{argmax, softmax_ce_backward, weighted_cross_entropy, CostMatrix, PROB_FLOOR};
pub use optim::{AdaDelta, DEFAULT_EPS, DEFAULT_RHO};
pub use scalar::Scalar;
pub use tensor::Tensor;
