//! # cgib
//!
//! A desk-scale laboratory for causal graph regression. The crate learns to
//! split each input graph into a causal subgraph (the part that determines
//! the regression target) and a confounding subgraph (spuriously correlated
//! structure that may still be predictive), using differentiable soft masks
//! over nodes and edges.
//!
//! The pieces:
//!
//! - [`tensor`] — dense f64 tensors with reverse-mode differentiation and a
//!   finite-difference gradient checker.
//! - [`graph`] — graph/batch data model and a line-delimited JSON dataset
//!   format.
//! - [`gnn`] — GIN message passing with optional per-node and per-edge
//!   weights, plus mean/sum pooling.
//! - [`disentangle`] — soft mask computation and the shared-parameter
//!   causal/confounding subgraph representations with distinct readouts.
//! - [`losses`] — prediction losses for both heads, the mutual-information
//!   compression proxy, representation mixing, and the contrastive
//!   causal-intervention loss.
//! - [`datagen`] — synthetic spurious-motif regression datasets with
//!   covariate and concept shifts.
//! - [`trainer`] — deterministic Adam training with cosine annealing,
//!   evaluation, mask-quality scoring, and checkpoints.
//! - [`gradcheck`] — a named finite-difference suite over every primitive
//!   and the fully composed objective.
//! - [`cli`] — the `cgib` command-line interface (`gen`, `train`, `eval`,
//!   `gradcheck`, `ablate`).
//!
//! See the `examples/` directory for runnable entry points per capability.

pub mod cli;
pub mod datagen;
pub mod disentangle;
pub mod error;
pub mod gnn;
pub mod gradcheck;
pub mod graph;
pub mod losses;
pub mod model;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
pub use tensor::Tensor;
