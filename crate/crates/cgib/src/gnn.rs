//! GIN message passing with optional per-node and per-edge soft weights.
//!
//! The same encoder serves two roles: the front encoder producing node
//! embeddings for mask computation, and (with mask weights applied) the
//! shared subgraph network that represents the causal and confounding parts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Batch;
use crate::tensor::Tensor;

/// Graph-level readout style.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    Mean,
    Sum,
}

/// Architecture of a GIN encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GinConfig {
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub epsilon: f64,
    pub pooling: Pooling,
}

impl Default for GinConfig {
    fn default() -> Self {
        GinConfig {
            num_layers: 3,
            hidden_dim: 64,
            epsilon: 0.0,
            pooling: Pooling::Mean,
        }
    }
}

impl GinConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers < 1 {
            return Err(Error::Validation("num_layers must be >= 1".into()));
        }
        if self.hidden_dim < 1 {
            return Err(Error::Validation("hidden_dim must be >= 1".into()));
        }
        Ok(())
    }
}

/// Two-layer MLP with a ReLU between the layers.
#[derive(Debug, Clone)]
pub struct MlpParams {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
}

impl MlpParams {
    pub fn init(
        in_dim: usize,
        hidden_dim: usize,
        out_dim: usize,
        rng: &mut impl rand::Rng,
    ) -> MlpParams {
        MlpParams {
            w1: he_normal(in_dim, hidden_dim, rng),
            b1: Tensor::param(vec![0.0; hidden_dim], &[hidden_dim]).unwrap(),
            w2: he_normal(hidden_dim, out_dim, rng),
            b2: Tensor::param(vec![0.0; out_dim], &[out_dim]).unwrap(),
        }
    }

    /// Variant whose final layer starts at zero, so outputs begin neutral.
    pub fn init_zero_head(
        in_dim: usize,
        hidden_dim: usize,
        out_dim: usize,
        rng: &mut impl rand::Rng,
    ) -> MlpParams {
        MlpParams {
            w1: he_normal(in_dim, hidden_dim, rng),
            b1: Tensor::param(vec![0.0; hidden_dim], &[hidden_dim]).unwrap(),
            w2: Tensor::param(vec![0.0; hidden_dim * out_dim], &[hidden_dim, out_dim]).unwrap(),
            b2: Tensor::param(vec![0.0; out_dim], &[out_dim]).unwrap(),
        }
    }

    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        x.matmul(&self.w1)?
            .add_bias(&self.b1)?
            .relu()
            .matmul(&self.w2)?
            .add_bias(&self.b2)
    }

    pub fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        out.push((format!("{prefix}.w1"), &self.w1));
        out.push((format!("{prefix}.b1"), &self.b1));
        out.push((format!("{prefix}.w2"), &self.w2));
        out.push((format!("{prefix}.b2"), &self.b2));
    }

    pub fn map(
        &self,
        prefix: &str,
        f: &mut impl FnMut(&str, &Tensor) -> Result<Tensor>,
    ) -> Result<MlpParams> {
        Ok(MlpParams {
            w1: f(&format!("{prefix}.w1"), &self.w1)?,
            b1: f(&format!("{prefix}.b1"), &self.b1)?,
            w2: f(&format!("{prefix}.w2"), &self.w2)?,
            b2: f(&format!("{prefix}.b2"), &self.b2)?,
        })
    }
}

// Half-scale He initialization. Sum aggregation inflates activations by
// roughly (1 + degree) per layer; the damped init keeps deep, wide encoders
// from saturating their readouts before training starts.
pub(crate) fn he_normal(in_dim: usize, out_dim: usize, rng: &mut impl rand::Rng) -> Tensor {
    use rand_distr::{Distribution, Normal};
    let std = 0.5 * (2.0 / in_dim as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("std is finite and positive");
    let data = (0..in_dim * out_dim).map(|_| normal.sample(rng)).collect();
    Tensor::param(data, &[in_dim, out_dim]).unwrap()
}

/// Parameters of a GIN encoder: an input projection and one MLP per layer.
#[derive(Debug, Clone)]
pub struct GinParams {
    pub input_w: Tensor,
    pub input_b: Tensor,
    pub layers: Vec<MlpParams>,
}

impl GinParams {
    pub fn init(config: &GinConfig, feature_dim: usize, rng: &mut impl rand::Rng) -> GinParams {
        let h = config.hidden_dim;
        GinParams {
            input_w: he_normal(feature_dim, h, rng),
            input_b: Tensor::param(vec![0.0; h], &[h]).unwrap(),
            layers: (0..config.num_layers)
                .map(|_| MlpParams::init(h, h, h, rng))
                .collect(),
        }
    }

    pub fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        out.push((format!("{prefix}.input_w"), &self.input_w));
        out.push((format!("{prefix}.input_b"), &self.input_b));
        for (i, layer) in self.layers.iter().enumerate() {
            layer.visit(&format!("{prefix}.layer{i}"), out);
        }
    }

    pub fn map(
        &self,
        prefix: &str,
        f: &mut impl FnMut(&str, &Tensor) -> Result<Tensor>,
    ) -> Result<GinParams> {
        Ok(GinParams {
            input_w: f(&format!("{prefix}.input_w"), &self.input_w)?,
            input_b: f(&format!("{prefix}.input_b"), &self.input_b)?,
            layers: self
                .layers
                .iter()
                .enumerate()
                .map(|(i, layer)| layer.map(&format!("{prefix}.layer{i}"), f))
                .collect::<Result<Vec<_>>>()?,
        })
    }
}

fn check_weights(w: &Tensor, expected_len: usize, what: &str) -> Result<()> {
    if w.len() != expected_len {
        return Err(Error::InvalidShape(format!(
            "{what}: got {} weights, expected {expected_len}",
            w.len()
        )));
    }
    if w.data().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::Validation(format!("{what}: weights must lie in [0, 1]")));
    }
    Ok(())
}

/// Node embeddings `[total_nodes, hidden_dim]` from GIN message passing.
///
/// Each layer computes `h_i <- MLP((1 + eps) * h_i + sum_{(j->i)} w_ji * h_j)`.
/// Node weights pre-scale the input features; absent weights act as ones.
pub fn encode(
    batch: &Batch,
    config: &GinConfig,
    params: &GinParams,
    edge_weights: Option<&Tensor>,
    node_weights: Option<&Tensor>,
) -> Result<Tensor> {
    config.validate()?;
    if let Some(ew) = edge_weights {
        check_weights(ew, batch.edges.len(), "edge_weights")?;
    }
    if let Some(nw) = node_weights {
        check_weights(nw, batch.total_nodes, "node_weights")?;
    }

    let mut x = batch.features_tensor();
    if let Some(nw) = node_weights {
        x = x.scale_rows(nw)?;
    }
    let mut h = x.matmul(&params.input_w)?.add_bias(&params.input_b)?;

    let sources: Vec<usize> = batch.edges.iter().map(|&(u, _)| u).collect();
    let destinations: Vec<usize> = batch.edges.iter().map(|&(_, v)| v).collect();

    for layer in &params.layers {
        let self_term = h.scalar_mul(1.0 + config.epsilon);
        let combined = if batch.edges.is_empty() {
            self_term
        } else {
            let mut messages = h.row_gather(&sources)?;
            if let Some(ew) = edge_weights {
                messages = messages.scale_rows(ew)?;
            }
            let aggregated = messages.segment_sum(&destinations, batch.total_nodes)?;
            self_term.add(&aggregated)?
        };
        h = layer.apply(&combined)?;
    }
    Ok(h)
}

/// Per-graph pooled representations `[num_graphs, hidden_dim]`.
pub fn pool(
    node_embeddings: &Tensor,
    graph_index: &[usize],
    num_graphs: usize,
    pooling: Pooling,
) -> Result<Tensor> {
    match pooling {
        Pooling::Mean => node_embeddings.segment_mean(graph_index, num_graphs),
        Pooling::Sum => node_embeddings.segment_sum(graph_index, num_graphs),
    }
}
