//! Synthetic spurious-motif regression datasets with controllable shifts.
//!
//! Every graph is a base graph (the confounding part) joined by one bridge
//! edge to a motif (the causal part). The target depends only on the motif
//! kind and a continuous signal feature carried by one designated motif
//! node: `y = intercept(motif) + signal_coeff * s + noise`. Base kind is
//! spuriously correlated with motif kind in the training distribution; the
//! concept-shift split redraws that correlation adversarially, the
//! covariate-shift split moves to unseen base sizes.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotifKind {
    Cycle5,
    House,
    Star4,
}

impl MotifKind {
    pub fn name(&self) -> &'static str {
        match self {
            MotifKind::Cycle5 => "cycle5",
            MotifKind::House => "house",
            MotifKind::Star4 => "star4",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseKind {
    Tree,
    Ladder,
    Wheel,
}

impl BaseKind {
    pub fn name(&self) -> &'static str {
        match self {
            BaseKind::Tree => "tree",
            BaseKind::Ladder => "ladder",
            BaseKind::Wheel => "wheel",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shift {
    None,
    Covariate,
    Concept,
}

/// Generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub num_train: usize,
    pub num_id_val: usize,
    pub num_id_test: usize,
    pub num_ood_val: usize,
    pub num_ood_test: usize,
    pub motifs: Vec<MotifKind>,
    pub bases: Vec<BaseKind>,
    /// Inclusive base-graph size range for the training distribution.
    pub base_size_range: (usize, usize),
    /// Probability that a graph's base kind follows the motif-correlated
    /// assignment.
    pub spurious_strength: f64,
    pub shift: Shift,
    pub signal_coeff: f64,
    pub motif_intercepts: BTreeMap<MotifKind, f64>,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        let mut intercepts = BTreeMap::new();
        intercepts.insert(MotifKind::Cycle5, 0.0);
        intercepts.insert(MotifKind::House, 3.0);
        intercepts.insert(MotifKind::Star4, 6.0);
        SynthSpec {
            num_train: 2000,
            num_id_val: 500,
            num_id_test: 500,
            num_ood_val: 500,
            num_ood_test: 500,
            motifs: vec![MotifKind::Cycle5, MotifKind::House, MotifKind::Star4],
            bases: vec![BaseKind::Tree, BaseKind::Ladder, BaseKind::Wheel],
            base_size_range: (6, 15),
            spurious_strength: 0.9,
            shift: Shift::Concept,
            signal_coeff: 2.0,
            motif_intercepts: intercepts,
            noise_std: 0.1,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.spurious_strength) {
            return Err(Error::Validation(format!(
                "spurious_strength {} outside [0, 1]",
                self.spurious_strength
            )));
        }
        let (lo, hi) = self.base_size_range;
        if lo > hi {
            return Err(Error::Validation(format!("base size range [{lo}, {hi}]")));
        }
        if lo < 4 {
            return Err(Error::Validation("base graphs need at least 4 nodes".into()));
        }
        if self.motifs.is_empty() || self.bases.is_empty() {
            return Err(Error::Validation("need at least one motif and one base".into()));
        }
        for m in &self.motifs {
            if !self.motif_intercepts.contains_key(m) {
                return Err(Error::Validation(format!("no intercept for motif {}", m.name())));
            }
        }
        if self.noise_std < 0.0 {
            return Err(Error::Validation("noise_std must be >= 0".into()));
        }
        if self.num_train == 0 {
            return Err(Error::Validation("num_train must be >= 1".into()));
        }
        Ok(())
    }
}

/// The five dataset splits. OOD splits are empty when `shift == None`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitBundle {
    pub train: Vec<Graph>,
    pub id_val: Vec<Graph>,
    pub id_test: Vec<Graph>,
    pub ood_val: Vec<Graph>,
    pub ood_test: Vec<Graph>,
}

impl SplitBundle {
    pub fn splits(&self) -> [(&'static str, &Vec<Graph>); 5] {
        [
            ("train", &self.train),
            ("id_val", &self.id_val),
            ("id_test", &self.id_test),
            ("ood_val", &self.ood_val),
            ("ood_test", &self.ood_test),
        ]
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn graph_rng(seed: u64, split: u64, index: u64) -> ChaCha8Rng {
    let mixed = splitmix64(splitmix64(seed ^ splitmix64(split)) ^ index);
    ChaCha8Rng::seed_from_u64(mixed)
}

fn motif_edges(kind: MotifKind) -> (usize, Vec<(usize, usize)>) {
    // Undirected edge lists over motif-local node ids; node 0 carries the
    // signal feature.
    match kind {
        MotifKind::Cycle5 => (5, vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]),
        MotifKind::House => (5, vec![(0, 1), (1, 2), (2, 3), (3, 0), (2, 4), (3, 4)]),
        MotifKind::Star4 => (5, vec![(0, 1), (0, 2), (0, 3), (0, 4)]),
    }
}

fn base_edges(kind: BaseKind, n: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    match kind {
        BaseKind::Tree => (1..n).map(|i| (rng.gen_range(0..i), i)).collect(),
        BaseKind::Ladder => {
            let mut edges = Vec::new();
            for i in 0..n {
                if i + 2 < n {
                    edges.push((i, i + 2));
                }
            }
            for i in (0..n - 1).step_by(2) {
                edges.push((i, i + 1));
            }
            edges
        }
        BaseKind::Wheel => {
            let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (0, i)).collect();
            for i in 1..n - 1 {
                edges.push((i, i + 1));
            }
            edges.push((n - 1, 1));
            edges
        }
    }
}

struct DrawContext<'a> {
    spec: &'a SynthSpec,
    /// Base drawn for each motif index when the correlated assignment fires.
    assignment: Vec<BaseKind>,
    size_range: (usize, usize),
}

fn correlated_assignment(spec: &SynthSpec, shifted: bool) -> Vec<BaseKind> {
    let k = spec.bases.len();
    (0..spec.motifs.len())
        .map(|i| spec.bases[(i + usize::from(shifted)) % k])
        .collect()
}

fn draw_graph(ctx: &DrawContext, split_name: &str, rng: &mut ChaCha8Rng) -> Graph {
    let spec = ctx.spec;
    let motif_idx = rng.gen_range(0..spec.motifs.len());
    let motif = spec.motifs[motif_idx];

    let assigned = ctx.assignment[motif_idx];
    let base = if rng.gen_bool(spec.spurious_strength) || spec.bases.len() == 1 {
        assigned
    } else {
        let others: Vec<BaseKind> = spec.bases.iter().copied().filter(|&b| b != assigned).collect();
        others[rng.gen_range(0..others.len())]
    };

    let n_base = rng.gen_range(ctx.size_range.0..=ctx.size_range.1);
    let mut undirected = base_edges(base, n_base, rng);
    let (n_motif, motif_local) = motif_edges(motif);
    undirected.extend(motif_local.iter().map(|&(u, v)| (u + n_base, v + n_base)));

    let bridge_base = rng.gen_range(0..n_base);
    let bridge_motif = n_base + rng.gen_range(0..n_motif);
    undirected.push((bridge_base, bridge_motif));

    let n = n_base + n_motif;
    let mut edges = Vec::with_capacity(undirected.len() * 2);
    for &(u, v) in &undirected {
        edges.push((u, v));
        edges.push((v, u));
    }

    let signal_node = n_base; // motif-local node 0
    let s: f64 = rng.gen_range(0.0..1.0);

    let mut degree = vec![0usize; n];
    for &(u, _) in &edges {
        degree[u] += 1;
    }
    let max_degree = *degree.iter().max().expect("graph is nonempty") as f64;
    let features: Vec<Vec<f64>> = (0..n)
        .map(|v| {
            let mut f = vec![0.0; 4];
            let role = if v == signal_node {
                2
            } else if v >= n_base {
                1
            } else {
                0
            };
            f[role] = degree[v] as f64 / max_degree;
            if v == signal_node {
                f[3] = s;
            }
            f
        })
        .collect();

    let noise = if spec.noise_std > 0.0 {
        Normal::new(0.0, spec.noise_std)
            .expect("validated noise_std")
            .sample(rng)
    } else {
        0.0
    };
    let y = spec.motif_intercepts[&motif] + spec.signal_coeff * s + noise;

    let mut meta = BTreeMap::new();
    meta.insert("motif".to_string(), motif.name().to_string());
    meta.insert("base".to_string(), base.name().to_string());
    meta.insert("s".to_string(), format!("{s}"));
    meta.insert("split".to_string(), split_name.to_string());
    meta.insert(
        "motif_nodes".to_string(),
        (n_base..n).map(|i| i.to_string()).collect::<Vec<_>>().join(","),
    );
    meta.insert("signal_node".to_string(), signal_node.to_string());

    Graph::new(n, features, edges, y, meta).expect("generated graphs are valid by construction")
}

/// Generate the five splits deterministically from the spec seed. Each
/// graph's randomness derives from (seed, split, index), so generation order
/// does not matter.
pub fn generate(spec: &SynthSpec) -> Result<SplitBundle> {
    spec.validate()?;
    let id_assignment = correlated_assignment(spec, false);
    let (lo, hi) = spec.base_size_range;

    let id_ctx = DrawContext {
        spec,
        assignment: id_assignment.clone(),
        size_range: (lo, hi),
    };
    let ood_ctx = match spec.shift {
        Shift::None => None,
        Shift::Covariate => Some(DrawContext {
            spec,
            assignment: id_assignment,
            size_range: (hi + 1, 2 * hi),
        }),
        Shift::Concept => Some(DrawContext {
            spec,
            assignment: correlated_assignment(spec, true),
            size_range: (lo, hi),
        }),
    };

    let make = |ctx: &DrawContext, split_code: u64, split_name: &str, count: usize| -> Vec<Graph> {
        (0..count)
            .map(|i| {
                let mut rng = graph_rng(spec.seed, split_code, i as u64);
                draw_graph(ctx, split_name, &mut rng)
            })
            .collect()
    };

    let (ood_val, ood_test) = match &ood_ctx {
        None => (Vec::new(), Vec::new()),
        Some(ctx) => (
            make(ctx, 3, "ood_val", spec.num_ood_val),
            make(ctx, 4, "ood_test", spec.num_ood_test),
        ),
    };

    Ok(SplitBundle {
        train: make(&id_ctx, 0, "train", spec.num_train),
        id_val: make(&id_ctx, 1, "id_val", spec.num_id_val),
        id_test: make(&id_ctx, 2, "id_test", spec.num_id_test),
        ood_val,
        ood_test,
    })
}

/// Per-split summary: counts, motif-by-base contingency, target moments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSummary {
    pub count: usize,
    pub motif_labels: Vec<String>,
    pub base_labels: Vec<String>,
    /// Counts indexed `[motif][base]` in label order.
    pub contingency: Vec<Vec<usize>>,
    /// Row-normalized frequencies of `contingency`.
    pub row_freq: Vec<Vec<f64>>,
    pub y_mean: f64,
    pub y_std: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitStats {
    pub splits: BTreeMap<String, SplitSummary>,
}

impl SplitSummary {
    /// Fraction of graphs whose base kind matches the index-aligned motif.
    pub fn diagonal_mass(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        let diag: usize = self
            .contingency
            .iter()
            .enumerate()
            .map(|(i, row)| row.get(i % row.len().max(1)).copied().unwrap_or(0))
            .sum();
        diag as f64 / self.count as f64
    }
}

pub fn split_stats(bundle: &SplitBundle) -> SplitStats {
    let motif_labels = ["cycle5", "house", "star4"];
    let base_labels = ["tree", "ladder", "wheel"];
    let mut splits = BTreeMap::new();
    for (name, graphs) in bundle.splits() {
        let mut contingency = vec![vec![0usize; base_labels.len()]; motif_labels.len()];
        let mut ys = Vec::with_capacity(graphs.len());
        for g in graphs {
            ys.push(g.target);
            let m = g.meta.get("motif").map(String::as_str).unwrap_or("");
            let b = g.meta.get("base").map(String::as_str).unwrap_or("");
            if let (Some(mi), Some(bi)) = (
                motif_labels.iter().position(|&l| l == m),
                base_labels.iter().position(|&l| l == b),
            ) {
                contingency[mi][bi] += 1;
            }
        }
        let row_freq = contingency
            .iter()
            .map(|row| {
                let total: usize = row.iter().sum();
                row.iter()
                    .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
                    .collect()
            })
            .collect();
        let n = ys.len();
        let y_mean = if n == 0 { 0.0 } else { ys.iter().sum::<f64>() / n as f64 };
        let y_std = if n < 2 {
            0.0
        } else {
            (ys.iter().map(|y| (y - y_mean) * (y - y_mean)).sum::<f64>() / n as f64).sqrt()
        };
        splits.insert(
            name.to_string(),
            SplitSummary {
                count: n,
                motif_labels: motif_labels.iter().map(|s| s.to_string()).collect(),
                base_labels: base_labels.iter().map(|s| s.to_string()).collect(),
                contingency,
                row_freq,
                y_mean,
                y_std,
            },
        );
    }
    SplitStats { splits }
}

/// The ids of a graph's motif nodes, parsed from its metadata.
pub fn motif_nodes(graph: &Graph) -> Result<Vec<usize>> {
    let raw = graph
        .meta
        .get("motif_nodes")
        .ok_or_else(|| Error::Contract("graph metadata lacks motif_nodes".into()))?;
    raw.split(',')
        .map(|tok| {
            tok.parse::<usize>()
                .map_err(|_| Error::Contract(format!("bad motif_nodes token {tok:?}")))
        })
        .collect()
}

/// Uniform random permutation of `0..n`.
pub fn random_permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{HashMap, VecDeque};

    fn connected(g: &Graph) -> bool {
        let mut adj = vec![Vec::new(); g.num_nodes];
        for &(u, v) in &g.edges {
            adj[u].push(v);
        }
        let mut seen = vec![false; g.num_nodes];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == g.num_nodes
    }

    fn small_spec() -> SynthSpec {
        SynthSpec {
            num_train: 200,
            num_id_val: 50,
            num_id_test: 50,
            num_ood_val: 50,
            num_ood_test: 50,
            seed: 11,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn degenerate_target_is_the_intercept() {
        let spec = SynthSpec {
            noise_std: 0.0,
            signal_coeff: 0.0,
            ..small_spec()
        };
        let bundle = generate(&spec).unwrap();
        for g in &bundle.train {
            let motif = g.meta.get("motif").unwrap();
            let want = match motif.as_str() {
                "cycle5" => 0.0,
                "house" => 3.0,
                "star4" => 6.0,
                other => panic!("unexpected motif {other}"),
            };
            assert_eq!(g.target, want);
        }
    }

    #[test]
    fn generation_is_bit_reproducible() {
        let spec = small_spec();
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn every_graph_is_connected_and_annotated() {
        let bundle = generate(&small_spec()).unwrap();
        for (_, graphs) in bundle.splits() {
            for g in graphs {
                assert!(connected(g), "disconnected graph");
                let nodes = motif_nodes(g).unwrap();
                assert_eq!(nodes.len(), 5);
                assert!(nodes.iter().all(|&i| i < g.num_nodes));
                let signal: usize = g.meta.get("signal_node").unwrap().parse().unwrap();
                let s: f64 = g.meta.get("s").unwrap().parse().unwrap();
                assert_eq!(g.node_features[signal][3], s);
            }
        }
    }

    #[test]
    fn perfect_correlation_gives_a_diagonal_table_and_misleads_off_distribution() {
        let spec = SynthSpec {
            spurious_strength: 1.0,
            shift: Shift::Concept,
            ..small_spec()
        };
        let bundle = generate(&spec).unwrap();
        let stats = split_stats(&bundle);
        let train = &stats.splits["train"];
        assert!((train.diagonal_mass() - 1.0).abs() < 1e-12);

        // Base-kind lookup predictor: mean target per base kind on train.
        let mut sums: HashMap<&str, (f64, usize)> = HashMap::new();
        for g in &bundle.train {
            let e = sums.entry(g.meta.get("base").unwrap().as_str()).or_insert((0.0, 0));
            e.0 += g.target;
            e.1 += 1;
        }
        let lookup: HashMap<&str, f64> = sums
            .into_iter()
            .map(|(k, (s, n))| (k, s / n as f64))
            .collect();
        let mae = |graphs: &[Graph]| -> f64 {
            graphs
                .iter()
                .map(|g| (g.target - lookup[g.meta.get("base").unwrap().as_str()]).abs())
                .sum::<f64>()
                / graphs.len() as f64
        };
        let train_mae = mae(&bundle.train);
        let ood_mae = mae(&bundle.ood_test);
        assert!(
            ood_mae > train_mae + 1.0,
            "base lookup should break off-distribution: train {train_mae}, ood {ood_mae}"
        );
        // In-distribution the lookup error is the signal spread plus noise.
        assert!(train_mae < 1.0);
    }

    #[test]
    fn shift_none_leaves_ood_splits_empty() {
        let spec = SynthSpec {
            shift: Shift::None,
            ..small_spec()
        };
        let bundle = generate(&spec).unwrap();
        assert!(bundle.ood_val.is_empty());
        assert!(bundle.ood_test.is_empty());
        let stats = split_stats(&bundle);
        assert_eq!(stats.splits["ood_test"].count, 0);
    }

    #[test]
    fn diagonal_mass_tracks_the_spurious_strength() {
        let spec = SynthSpec {
            num_train: 1000,
            ..small_spec()
        };
        let bundle = generate(&spec).unwrap();
        let stats = split_stats(&bundle);
        let diag = stats.splits["train"].diagonal_mass();
        // Binomial(1000, 0.9): +-3 sigma is about +-0.028.
        assert!(
            (0.87..=0.93).contains(&diag),
            "diagonal mass {diag} out of the 99% band"
        );
    }

    #[test]
    fn covariate_shift_moves_base_sizes_out_of_range() {
        let spec = SynthSpec {
            shift: Shift::Covariate,
            ..small_spec()
        };
        let bundle = generate(&spec).unwrap();
        let id_max = bundle.train.iter().map(|g| g.num_nodes).max().unwrap();
        let ood_min = bundle.ood_test.iter().map(|g| g.num_nodes).min().unwrap();
        assert!(id_max <= 15 + 5);
        assert!(ood_min >= 16 + 5);
        // Correlation structure is kept.
        let stats = split_stats(&bundle);
        assert!(stats.splits["ood_test"].diagonal_mass() > 0.8);
    }

    #[test]
    fn residuals_do_not_depend_on_the_base_kind() {
        let spec = SynthSpec {
            num_train: 2000,
            ..small_spec()
        };
        let bundle = generate(&spec).unwrap();
        let mut by_base: HashMap<&str, Vec<f64>> = HashMap::new();
        for g in &bundle.train {
            let s: f64 = g.meta.get("s").unwrap().parse().unwrap();
            let a = match g.meta.get("motif").unwrap().as_str() {
                "cycle5" => 0.0,
                "house" => 3.0,
                _ => 6.0,
            };
            let residual = g.target - a - spec.signal_coeff * s;
            by_base
                .entry(g.meta.get("base").unwrap().as_str())
                .or_default()
                .push(residual);
        }
        for (base, rs) in by_base {
            let mean = rs.iter().sum::<f64>() / rs.len() as f64;
            let bound = 4.0 * spec.noise_std / (rs.len() as f64).sqrt();
            assert!(
                mean.abs() < bound,
                "base {base}: residual mean {mean} exceeds {bound}"
            );
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let spec = SynthSpec {
            spurious_strength: 1.5,
            ..SynthSpec::default()
        };
        assert!(matches!(generate(&spec), Err(Error::Validation(_))));
        let spec = SynthSpec {
            base_size_range: (9, 6),
            ..SynthSpec::default()
        };
        assert!(generate(&spec).is_err());
    }
}
