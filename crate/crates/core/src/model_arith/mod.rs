//! Layer-merge plan arithmetic and sparse mixture-of-experts gating on plain vectors.
//!
//! Nothing here touches real checkpoints. Experts are caller-supplied vector functions and
//! the gate is a single affine map followed by a softmax over the selected top-k scores.

mod gate;
mod merge;
mod train;

pub mod clusters;

use thiserror::Error;

pub use gate::{gate_scores, gate_topk, moe_combine, moe_combine_batch, Expert, GateConfig, GateParams, TokenState, TopK};
pub use merge::{merge_plan, trainable_mask, LayerOrigin, MergePlan};
pub use train::{loss_and_gradient, routing_accuracy, train_gate, TrainOptions, TrainedGate};

#[derive(Debug, Error, PartialEq)]
pub enum ArithError {
    #[error("cannot take {donor_take} donor layers from a {base_layers}-layer model")]
    DonorExceedsBase { base_layers: usize, donor_take: usize },
    #[error("base model needs at least one layer")]
    EmptyBase,
    #[error("k = {k} must be in 1..={experts}")]
    InvalidK { k: usize, experts: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("gate produced a non-finite score for expert {0}")]
    NonFiniteScore(usize),
    #[error("expert {0} has no training samples")]
    EmptyClass(usize),
    #[error("need at least one expert")]
    NoExperts,
}
