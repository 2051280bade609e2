//! Soft mask computation and causal/confounding subgraph representations.
//!
//! A node MLP maps each encoder embedding to two logits; softmax over the
//! pair yields the node mask and its complement, so mask + complement = 1 by
//! construction. An edge MLP does the same on concatenated endpoint
//! embeddings. The masked graphs are then represented by a single
//! shared-parameter GIN applied twice, followed by two distinct linear
//! readout heads.

use crate::error::{Error, Result};
use crate::gnn::{self, GinConfig, GinParams, MlpParams};
use crate::graph::Batch;
use crate::tensor::Tensor;

/// Single linear readout head mapping `[B, hidden]` to `[B]`.
#[derive(Debug, Clone)]
pub struct LinearParams {
    pub w: Tensor,
    pub b: Tensor,
}

impl LinearParams {
    pub fn init(in_dim: usize, rng: &mut impl rand::Rng) -> LinearParams {
        use rand_distr::{Distribution, Normal};
        let std = (1.0 / in_dim as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("std is finite and positive");
        let data = (0..in_dim).map(|_| normal.sample(rng)).collect();
        LinearParams {
            w: Tensor::param(data, &[in_dim, 1]).unwrap(),
            b: Tensor::param(vec![0.0], &[1]).unwrap(),
        }
    }

    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        let rows = x.shape()[0];
        x.matmul(&self.w)?.add_bias(&self.b)?.reshape(&[rows])
    }

    pub fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        out.push((format!("{prefix}.w"), &self.w));
        out.push((format!("{prefix}.b"), &self.b));
    }

    pub fn map(
        &self,
        prefix: &str,
        f: &mut impl FnMut(&str, &Tensor) -> Result<Tensor>,
    ) -> Result<LinearParams> {
        Ok(LinearParams {
            w: f(&format!("{prefix}.w"), &self.w)?,
            b: f(&format!("{prefix}.b"), &self.b)?,
        })
    }
}

/// Attention MLPs producing node and edge masks.
#[derive(Debug, Clone)]
pub struct MaskParams {
    pub node_mlp: MlpParams,
    pub edge_mlp: MlpParams,
}

impl MaskParams {
    /// Final layers start at zero so every mask begins at the neutral 0.5.
    pub fn init(hidden_dim: usize, rng: &mut impl rand::Rng) -> MaskParams {
        MaskParams {
            node_mlp: MlpParams::init_zero_head(hidden_dim, hidden_dim, 2, rng),
            edge_mlp: MlpParams::init_zero_head(2 * hidden_dim, hidden_dim, 2, rng),
        }
    }

    pub fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        self.node_mlp.visit(&format!("{prefix}.node_mlp"), out);
        self.edge_mlp.visit(&format!("{prefix}.edge_mlp"), out);
    }

    pub fn map(
        &self,
        prefix: &str,
        f: &mut impl FnMut(&str, &Tensor) -> Result<Tensor>,
    ) -> Result<MaskParams> {
        Ok(MaskParams {
            node_mlp: self.node_mlp.map(&format!("{prefix}.node_mlp"), f)?,
            edge_mlp: self.edge_mlp.map(&format!("{prefix}.edge_mlp"), f)?,
        })
    }
}

/// Per-node and per-edge soft masks with their complements, all in [0, 1].
#[derive(Debug, Clone)]
pub struct MaskPair {
    pub node: Tensor,
    pub node_comp: Tensor,
    pub edge: Tensor,
    pub edge_comp: Tensor,
}

impl MaskPair {
    /// Exchange mask and complement for both nodes and edges.
    pub fn swapped(&self) -> MaskPair {
        MaskPair {
            node: self.node_comp.clone(),
            node_comp: self.node.clone(),
            edge: self.edge_comp.clone(),
            edge_comp: self.edge.clone(),
        }
    }
}

/// Soft masks from encoder embeddings. Softmax over two logits per node and
/// per directed edge keeps each mask and its complement summing to one.
pub fn compute_masks(
    node_embeddings: &Tensor,
    edges: &[(usize, usize)],
    params: &MaskParams,
) -> Result<MaskPair> {
    let node_probs = params.node_mlp.apply(node_embeddings)?.softmax_last_dim()?;
    let node = node_probs.slice_column(0)?;
    let node_comp = node_probs.slice_column(1)?;

    let (edge, edge_comp) = if edges.is_empty() {
        (
            Tensor::from_vec(vec![], &[0])?,
            Tensor::from_vec(vec![], &[0])?,
        )
    } else {
        let sources: Vec<usize> = edges.iter().map(|&(u, _)| u).collect();
        let destinations: Vec<usize> = edges.iter().map(|&(_, v)| v).collect();
        let src_h = node_embeddings.row_gather(&sources)?;
        let dst_h = node_embeddings.row_gather(&destinations)?;
        let pair = Tensor::concat_last_dim(&[&src_h, &dst_h])?;
        let edge_probs = params.edge_mlp.apply(&pair)?.softmax_last_dim()?;
        (edge_probs.slice_column(0)?, edge_probs.slice_column(1)?)
    };

    Ok(MaskPair {
        node,
        node_comp,
        edge,
        edge_comp,
    })
}

/// Everything the losses need from one forward pass.
#[derive(Debug, Clone)]
pub struct DisentangleOutput {
    /// Pooled original-graph representations `[B, hidden]`.
    pub h_g: Tensor,
    /// Pooled causal-subgraph representations `[B, hidden]`.
    pub h_c: Tensor,
    /// Pooled confounding-subgraph representations `[B, hidden]`.
    pub h_s: Tensor,
    /// Causal-head predictions `[B]`.
    pub mu_c: Tensor,
    /// Confounding-head predictions `[B]`.
    pub mu_s: Tensor,
    pub masks: MaskPair,
}

/// Represent the masked subgraphs with one shared-parameter GIN applied to
/// both the causal input (mask) and the confounding input (complement), then
/// read out scalar predictions with two distinct heads.
pub fn split_and_represent(
    batch: &Batch,
    config: &GinConfig,
    masks: &MaskPair,
    shared_gnn: &GinParams,
    readout_c: &LinearParams,
    readout_s: &LinearParams,
    encoder_node_embeddings: &Tensor,
) -> Result<DisentangleOutput> {
    if masks.node.len() != batch.total_nodes || masks.edge.len() != batch.edges.len() {
        return Err(Error::InvalidShape(format!(
            "masks cover {} nodes / {} edges, batch has {} / {}",
            masks.node.len(),
            masks.edge.len(),
            batch.total_nodes,
            batch.edges.len()
        )));
    }
    let causal_nodes = gnn::encode(batch, config, shared_gnn, Some(&masks.edge), Some(&masks.node))?;
    let confound_nodes = gnn::encode(
        batch,
        config,
        shared_gnn,
        Some(&masks.edge_comp),
        Some(&masks.node_comp),
    )?;
    let h_c = gnn::pool(&causal_nodes, &batch.graph_index, batch.num_graphs, config.pooling)?;
    let h_s = gnn::pool(
        &confound_nodes,
        &batch.graph_index,
        batch.num_graphs,
        config.pooling,
    )?;
    let h_g = gnn::pool(
        encoder_node_embeddings,
        &batch.graph_index,
        batch.num_graphs,
        config.pooling,
    )?;
    let mu_c = readout_c.apply(&h_c)?;
    let mu_s = readout_s.apply(&h_s)?;
    Ok(DisentangleOutput {
        h_g,
        h_c,
        h_s,
        mu_c,
        mu_s,
        masks: masks.clone(),
    })
}
