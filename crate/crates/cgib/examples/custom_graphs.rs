//! Use the library on hand-built graphs: construct, batch, and run one
//! forward pass of the disentangling model.
//!
//! ```bash
//! cargo run -p cgib --example custom_graphs
//! ```

use std::collections::BTreeMap;

use cgib::graph::{batch, Graph};
use cgib::gnn::{GinConfig, Pooling};
use cgib::model::{ModelConfig, ModelState};

fn main() -> cgib::Result<()> {
    // Two tiny molecules-of-a-sort: a triangle and a 4-path, 2-dim features.
    let triangle = Graph::new(
        3,
        vec![vec![1.0, 0.2], vec![0.8, 0.1], vec![0.9, 0.4]],
        vec![(0, 1), (1, 0), (1, 2), (2, 1), (2, 0), (0, 2)],
        1.5,
        BTreeMap::new(),
    )?;
    let path = Graph::new(
        4,
        vec![vec![0.1, 0.9], vec![0.3, 0.7], vec![0.2, 0.8], vec![0.0, 1.0]],
        vec![(0, 1), (1, 0), (1, 2), (2, 1), (2, 3), (3, 2)],
        -0.5,
        BTreeMap::new(),
    )?;
    let b = batch(&[triangle, path])?;
    println!(
        "batch: {} graphs, {} nodes, graph_index {:?}",
        b.num_graphs, b.total_nodes, b.graph_index
    );

    let model = ModelState::init(
        ModelConfig {
            feature_dim: 2,
            gin: GinConfig {
                num_layers: 2,
                hidden_dim: 8,
                epsilon: 0.0,
                pooling: Pooling::Mean,
            },
        },
        42,
    )?;
    let out = model.forward(&b)?;
    println!("causal predictions:      {:?}", out.mu_c.data());
    println!("confounding predictions: {:?}", out.mu_s.data());
    println!(
        "node masks (fresh model starts neutral at 0.5): {:?}",
        out.masks.node.data()
    );
    Ok(())
}
