//! The full model: front encoder, mask MLPs, shared subgraph GIN, and two
//! readout heads, with deterministic initialization and named parameters.

use serde::{Deserialize, Serialize};

use crate::disentangle::{self, DisentangleOutput, LinearParams, MaskPair, MaskParams};
use crate::error::Result;
use crate::gnn::{self, GinConfig, GinParams};
use crate::graph::Batch;
use crate::tensor::Tensor;

/// Model architecture; stored in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub feature_dim: usize,
    pub gin: GinConfig,
}

/// Named parameter tensors for every trainable piece of the model.
///
/// The front encoder and the shared subgraph GIN have separate parameters;
/// the causal and confounding subgraphs share one GIN and differ only in
/// their readout heads.
#[derive(Debug, Clone)]
pub struct ModelState {
    pub config: ModelConfig,
    pub encoder: GinParams,
    pub shared: GinParams,
    pub masks: MaskParams,
    pub readout_c: LinearParams,
    pub readout_s: LinearParams,
}

impl ModelState {
    /// Deterministic initialization from a seed.
    pub fn init(config: ModelConfig, seed: u64) -> Result<ModelState> {
        use rand::SeedableRng;
        config.gin.validate()?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let h = config.gin.hidden_dim;
        let encoder = GinParams::init(&config.gin, config.feature_dim, &mut rng);
        let shared = GinParams::init(&config.gin, config.feature_dim, &mut rng);
        let masks = MaskParams::init(h, &mut rng);
        let readout_c = LinearParams::init(h, &mut rng);
        let readout_s = LinearParams::init(h, &mut rng);
        Ok(ModelState {
            config,
            encoder,
            shared,
            masks,
            readout_c,
            readout_s,
        })
    }

    /// Parameters in a fixed, deterministic order.
    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        self.encoder.visit("encoder", &mut out);
        self.shared.visit("shared", &mut out);
        self.masks.visit("masks", &mut out);
        self.readout_c.visit("readout_c", &mut out);
        self.readout_s.visit("readout_s", &mut out);
        out
    }

    /// Rebuild the state by transforming every parameter.
    pub fn map(&self, f: &mut impl FnMut(&str, &Tensor) -> Result<Tensor>) -> Result<ModelState> {
        Ok(ModelState {
            config: self.config.clone(),
            encoder: self.encoder.map("encoder", f)?,
            shared: self.shared.map("shared", f)?,
            masks: self.masks.map("masks", f)?,
            readout_c: self.readout_c.map("readout_c", f)?,
            readout_s: self.readout_s.map("readout_s", f)?,
        })
    }

    /// Constant copy of all parameters; evaluation skips graph recording.
    pub fn detached(&self) -> ModelState {
        self.map(&mut |_, t| Ok(t.detach()))
            .expect("detach cannot fail")
    }

    /// Full forward pass: encoder embeddings, masks, both subgraph
    /// representations, and both head predictions.
    pub fn forward(&self, batch: &Batch) -> Result<DisentangleOutput> {
        let embeddings = gnn::encode(batch, &self.config.gin, &self.encoder, None, None)?;
        let masks = disentangle::compute_masks(&embeddings, &batch.edges, &self.masks)?;
        disentangle::split_and_represent(
            batch,
            &self.config.gin,
            &masks,
            &self.shared,
            &self.readout_c,
            &self.readout_s,
            &embeddings,
        )
    }

    /// Causal head only: cheaper path for ablations and evaluation that do
    /// not touch the confounding branch.
    pub fn forward_causal_head(&self, batch: &Batch) -> Result<(Tensor, MaskPair)> {
        let embeddings = gnn::encode(batch, &self.config.gin, &self.encoder, None, None)?;
        let masks = disentangle::compute_masks(&embeddings, &batch.edges, &self.masks)?;
        let causal_nodes = gnn::encode(
            batch,
            &self.config.gin,
            &self.shared,
            Some(&masks.edge),
            Some(&masks.node),
        )?;
        let h_c = gnn::pool(
            &causal_nodes,
            &batch.graph_index,
            batch.num_graphs,
            self.config.gin.pooling,
        )?;
        Ok((self.readout_c.apply(&h_c)?, masks))
    }
}
