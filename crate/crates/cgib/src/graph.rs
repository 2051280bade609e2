//! Graph data model, batching, and the on-disk dataset format.
//!
//! Datasets are UTF-8 files with one JSON object per line:
//! `{"n": int, "edges": [[u,v],...], "x": [[float,...],...], "y": float,
//! "meta": {string: string}}`, keys emitted in exactly this order. Undirected
//! graphs are stored with both edge orientations.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A graph with dense node features and a scalar regression target.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub num_nodes: usize,
    /// One feature row per node; all rows share the same length.
    pub node_features: Vec<Vec<f64>>,
    /// Directed edges `(src, dst)` with endpoints `< num_nodes`.
    pub edges: Vec<(usize, usize)>,
    pub target: f64,
    pub meta: BTreeMap<String, String>,
}

impl Graph {
    pub fn new(
        num_nodes: usize,
        node_features: Vec<Vec<f64>>,
        edges: Vec<(usize, usize)>,
        target: f64,
        meta: BTreeMap<String, String>,
    ) -> Result<Graph> {
        if num_nodes == 0 {
            return Err(Error::Validation("graph must have at least one node".into()));
        }
        if node_features.len() != num_nodes {
            return Err(Error::Validation(format!(
                "{} feature rows for {} nodes",
                node_features.len(),
                num_nodes
            )));
        }
        let dim = node_features[0].len();
        for (i, row) in node_features.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Validation(format!(
                    "feature row {i} has length {}, expected {dim}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("non-finite feature in row {i}")));
            }
        }
        if !target.is_finite() {
            return Err(Error::Validation("non-finite target".into()));
        }
        let allow_self_loops = meta.get("allow_self_loops").map(String::as_str) == Some("true");
        for &(u, v) in &edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::Validation(format!(
                    "edge ({u}, {v}) out of range for {num_nodes} nodes"
                )));
            }
            if u == v && !allow_self_loops {
                return Err(Error::Validation(format!("self-loop at node {u}")));
            }
        }
        Ok(Graph {
            num_nodes,
            node_features,
            edges,
            target,
            meta,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.node_features[0].len()
    }
}

/// Disjoint union of graphs with node-to-graph bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// Flat row-major `[total_nodes, feature_dim]` features.
    pub node_features: Vec<f64>,
    pub feature_dim: usize,
    pub total_nodes: usize,
    /// Edges with offset-shifted endpoints; never cross graph boundaries.
    pub edges: Vec<(usize, usize)>,
    /// Non-decreasing map node -> graph.
    pub graph_index: Vec<usize>,
    pub targets: Vec<f64>,
    pub num_graphs: usize,
    /// Per-graph metadata, preserved so batching is invertible.
    pub metas: Vec<BTreeMap<String, String>>,
    /// Graph `i` owns nodes `node_offsets[i]..node_offsets[i + 1]`.
    pub node_offsets: Vec<usize>,
}

impl Batch {
    /// Node features as a constant `[total_nodes, feature_dim]` tensor.
    pub fn features_tensor(&self) -> Tensor {
        Tensor::from_vec(
            self.node_features.clone(),
            &[self.total_nodes, self.feature_dim],
        )
        .expect("batch features are consistent by construction")
    }

    /// Targets as a constant `[num_graphs]` tensor.
    pub fn targets_tensor(&self) -> Tensor {
        Tensor::from_vec(self.targets.clone(), &[self.num_graphs])
            .expect("batch targets are consistent by construction")
    }
}

/// Disjoint union preserving per-graph node order; targets in input order.
pub fn batch(graphs: &[Graph]) -> Result<Batch> {
    if graphs.is_empty() {
        return Err(Error::Contract("batch of zero graphs".into()));
    }
    let dim = graphs[0].feature_dim();
    if let Some(g) = graphs.iter().find(|g| g.feature_dim() != dim) {
        return Err(Error::InvalidShape(format!(
            "mixed feature dims: {} vs {}",
            dim,
            g.feature_dim()
        )));
    }
    let total_nodes: usize = graphs.iter().map(|g| g.num_nodes).sum();
    let mut node_features = Vec::with_capacity(total_nodes * dim);
    let mut edges = Vec::new();
    let mut graph_index = Vec::with_capacity(total_nodes);
    let mut node_offsets = Vec::with_capacity(graphs.len() + 1);
    let mut offset = 0;
    for (gi, g) in graphs.iter().enumerate() {
        node_offsets.push(offset);
        for row in &g.node_features {
            node_features.extend_from_slice(row);
        }
        for &(u, v) in &g.edges {
            edges.push((u + offset, v + offset));
        }
        graph_index.extend(std::iter::repeat(gi).take(g.num_nodes));
        offset += g.num_nodes;
    }
    node_offsets.push(offset);
    Ok(Batch {
        node_features,
        feature_dim: dim,
        total_nodes,
        edges,
        graph_index,
        targets: graphs.iter().map(|g| g.target).collect(),
        num_graphs: graphs.len(),
        metas: graphs.iter().map(|g| g.meta.clone()).collect(),
        node_offsets,
    })
}

/// Split a batch back into its member graphs.
pub fn unbatch(b: &Batch) -> Vec<Graph> {
    let mut graphs = Vec::with_capacity(b.num_graphs);
    for gi in 0..b.num_graphs {
        let (lo, hi) = (b.node_offsets[gi], b.node_offsets[gi + 1]);
        let node_features = (lo..hi)
            .map(|i| b.node_features[i * b.feature_dim..(i + 1) * b.feature_dim].to_vec())
            .collect();
        let edges = b
            .edges
            .iter()
            .filter(|&&(u, _)| u >= lo && u < hi)
            .map(|&(u, v)| (u - lo, v - lo))
            .collect();
        graphs.push(Graph {
            num_nodes: hi - lo,
            node_features,
            edges,
            target: b.targets[gi],
            meta: b.metas[gi].clone(),
        });
    }
    graphs
}

#[derive(Serialize, Deserialize)]
struct Record {
    n: usize,
    edges: Vec<[usize; 2]>,
    x: Vec<Vec<f64>>,
    y: f64,
    meta: BTreeMap<String, String>,
}

/// Write graphs as line-delimited JSON with canonical key order.
pub fn save_dataset<P: AsRef<Path>>(graphs: &[Graph], path: P) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for g in graphs {
        let record = Record {
            n: g.num_nodes,
            edges: g.edges.iter().map(|&(u, v)| [u, v]).collect(),
            x: g.node_features.clone(),
            y: g.target,
            meta: g.meta.clone(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Read a line-delimited JSON dataset, validating every record.
pub fn load_dataset<P: AsRef<Path>>(path: P) -> Result<Vec<Graph>> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut graphs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        let graph = Graph::new(
            record.n,
            record.x,
            record.edges.iter().map(|&[u, v]| (u, v)).collect(),
            record.y,
            record.meta,
        )
        .map_err(|e| Error::Validation(format!("line {}: {e}", i + 1)))?;
        graphs.push(graph);
    }
    Ok(graphs)
}
