//! Reverse traversal of the operation graph.

use std::collections::HashMap;

use super::{Op, Tensor};
use crate::error::{Error, Result};

/// Gradient tensors keyed by parameter, produced by [`Tensor::backward`].
pub struct Gradients {
    by_id: HashMap<u64, Tensor>,
}

impl Gradients {
    /// Gradient for `param`; zeros of the same shape when the loss never
    /// reached it.
    pub fn for_param(&self, param: &Tensor) -> Tensor {
        match self.by_id.get(&param.id()) {
            Some(g) => g.clone(),
            None => Tensor::zeros(param.shape()),
        }
    }

    pub fn contains(&self, param: &Tensor) -> bool {
        self.by_id.contains_key(&param.id())
    }

    /// Euclidean norm over every stored gradient. Summation follows sorted
    /// ids so the result is deterministic.
    pub fn global_norm(&self) -> f64 {
        let mut ids: Vec<u64> = self.by_id.keys().copied().collect();
        ids.sort_unstable();
        ids.iter()
            .map(|id| self.by_id[id].data().iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    /// Every gradient multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Gradients {
        let by_id = self
            .by_id
            .iter()
            .map(|(id, t)| {
                let data = t.data().iter().map(|v| v * factor).collect();
                (*id, Tensor::from_vec(data, t.shape()).expect("same shape"))
            })
            .collect();
        Gradients { by_id }
    }
}

pub(super) fn run(loss: &Tensor, params: &[&Tensor]) -> Result<Gradients> {
    if loss.len() != 1 {
        return Err(Error::Contract(format!(
            "backward requires a scalar loss, shape is {:?}",
            loss.shape()
        )));
    }

    // Reachable tracked nodes, keyed by id. Ids grow with creation order, so
    // descending id order is a valid reverse topological order.
    let mut nodes: HashMap<u64, Tensor> = HashMap::new();
    let mut stack = vec![loss.clone()];
    while let Some(t) = stack.pop() {
        if !t.tracked() || nodes.contains_key(&t.id()) {
            continue;
        }
        if let Some(op) = t.op() {
            for input in op.inputs() {
                if input.tracked() && !nodes.contains_key(&input.id()) {
                    stack.push(input.clone());
                }
            }
        }
        nodes.insert(t.id(), t);
    }

    let mut order: Vec<u64> = nodes.keys().copied().collect();
    order.sort_unstable_by(|a, b| b.cmp(a));

    let mut grads: HashMap<u64, Vec<f64>> = HashMap::new();
    grads.insert(loss.id(), vec![1.0]);

    let requested: std::collections::HashSet<u64> = params.iter().map(|p| p.id()).collect();
    let mut kept: HashMap<u64, Vec<f64>> = HashMap::new();

    for id in order {
        let node = &nodes[&id];
        let Some(g) = grads.remove(&id) else { continue };
        if requested.contains(&id) {
            kept.insert(id, g.clone());
        }
        let Some(op) = node.op() else { continue };
        propagate(op, node, &g, &mut grads);
    }

    let mut by_id = HashMap::new();
    for p in params {
        let g = kept
            .remove(&p.id())
            .unwrap_or_else(|| vec![0.0; p.len()]);
        by_id.insert(p.id(), Tensor::from_vec(g, p.shape())?);
    }
    Ok(Gradients { by_id })
}

fn acc<'a>(grads: &'a mut HashMap<u64, Vec<f64>>, t: &Tensor) -> Option<&'a mut Vec<f64>> {
    if !t.tracked() {
        return None;
    }
    Some(grads.entry(t.id()).or_insert_with(|| vec![0.0; t.len()]))
}

fn propagate(op: &Op, node: &Tensor, g: &[f64], grads: &mut HashMap<u64, Vec<f64>>) {
    match op {
        Op::Matmul(a, b) => {
            let (m, k) = (a.shape()[0], a.shape()[1]);
            let n = b.shape()[1];
            if let Some(ga) = acc(grads, a) {
                // dA += G · Bᵀ
                unsafe {
                    matrixmultiply::dgemm(
                        m,
                        n,
                        k,
                        1.0,
                        g.as_ptr(),
                        n as isize,
                        1,
                        b.data().as_ptr(),
                        1,
                        n as isize,
                        1.0,
                        ga.as_mut_ptr(),
                        k as isize,
                        1,
                    );
                }
            }
            if let Some(gb) = acc(grads, b) {
                // dB += Aᵀ · G
                unsafe {
                    matrixmultiply::dgemm(
                        k,
                        m,
                        n,
                        1.0,
                        a.data().as_ptr(),
                        1,
                        k as isize,
                        g.as_ptr(),
                        n as isize,
                        1,
                        1.0,
                        gb.as_mut_ptr(),
                        n as isize,
                        1,
                    );
                }
            }
        }
        Op::Add(a, b) => {
            if let Some(ga) = acc(grads, a) {
                for (x, gi) in ga.iter_mut().zip(g) {
                    *x += gi;
                }
            }
            if let Some(gb) = acc(grads, b) {
                for (x, gi) in gb.iter_mut().zip(g) {
                    *x += gi;
                }
            }
        }
        Op::Sub(a, b) => {
            if let Some(ga) = acc(grads, a) {
                for (x, gi) in ga.iter_mut().zip(g) {
                    *x += gi;
                }
            }
            if let Some(gb) = acc(grads, b) {
                for (x, gi) in gb.iter_mut().zip(g) {
                    *x -= gi;
                }
            }
        }
        Op::Mul(a, b) => {
            if let Some(ga) = acc(grads, a) {
                for i in 0..g.len() {
                    ga[i] += g[i] * b.data()[i];
                }
            }
            if let Some(gb) = acc(grads, b) {
                for i in 0..g.len() {
                    gb[i] += g[i] * a.data()[i];
                }
            }
        }
        Op::ScalarMul(a, c) => {
            if let Some(ga) = acc(grads, a) {
                for i in 0..g.len() {
                    ga[i] += g[i] * c;
                }
            }
        }
        Op::AddScalar(a) => {
            if let Some(ga) = acc(grads, a) {
                for (x, gi) in ga.iter_mut().zip(g) {
                    *x += gi;
                }
            }
        }
        Op::Relu(a) => {
            if let Some(ga) = acc(grads, a) {
                for i in 0..g.len() {
                    if a.data()[i] > 0.0 {
                        ga[i] += g[i];
                    }
                }
            }
        }
        Op::Sigmoid(a) => {
            if let Some(ga) = acc(grads, a) {
                for i in 0..g.len() {
                    let y = node.data()[i];
                    ga[i] += g[i] * y * (1.0 - y);
                }
            }
        }
        Op::Exp(a) => {
            if let Some(ga) = acc(grads, a) {
                for i in 0..g.len() {
                    ga[i] += g[i] * node.data()[i];
                }
            }
        }
        Op::Log(a) => {
            if let Some(ga) = acc(grads, a) {
                for i in 0..g.len() {
                    ga[i] += g[i] / a.data()[i];
                }
            }
        }
        Op::Square(a) => {
            if let Some(ga) = acc(grads, a) {
                for i in 0..g.len() {
                    ga[i] += 2.0 * a.data()[i] * g[i];
                }
            }
        }
        Op::SoftmaxLastDim(a) => {
            if let Some(ga) = acc(grads, a) {
                let (rows, width) = match a.shape() {
                    [n] => (1usize, *n),
                    [n, d] => (*n, *d),
                    _ => unreachable!(),
                };
                let y = node.data();
                for r in 0..rows {
                    let base = r * width;
                    let dot: f64 = (0..width).map(|j| g[base + j] * y[base + j]).sum();
                    for j in 0..width {
                        ga[base + j] += y[base + j] * (g[base + j] - dot);
                    }
                }
            }
        }
        Op::Sum(a) => {
            if let Some(ga) = acc(grads, a) {
                for x in ga.iter_mut() {
                    *x += g[0];
                }
            }
        }
        Op::Mean(a) => {
            if let Some(ga) = acc(grads, a) {
                let inv = 1.0 / a.len() as f64;
                for x in ga.iter_mut() {
                    *x += g[0] * inv;
                }
            }
        }
        Op::L2NormSquared(a) => {
            if let Some(ga) = acc(grads, a) {
                for i in 0..a.len() {
                    ga[i] += 2.0 * a.data()[i] * g[0];
                }
            }
        }
        Op::CosineSimilarity(a, b) => {
            let na: f64 = a.data().iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.data().iter().map(|x| x * x).sum::<f64>().sqrt();
            let c = node.data()[0];
            let inv = 1.0 / (na * nb);
            if let Some(ga) = acc(grads, a) {
                for i in 0..a.len() {
                    ga[i] += g[0] * (b.data()[i] * inv - c * a.data()[i] / (na * na));
                }
            }
            if let Some(gb) = acc(grads, b) {
                for i in 0..b.len() {
                    gb[i] += g[0] * (a.data()[i] * inv - c * b.data()[i] / (nb * nb));
                }
            }
        }
        Op::ConcatLastDim(parts) => {
            let rank = parts[0].shape().len();
            if rank == 1 {
                let mut off = 0;
                for p in parts {
                    let w = p.len();
                    if let Some(gp) = acc(grads, p) {
                        for j in 0..w {
                            gp[j] += g[off + j];
                        }
                    }
                    off += w;
                }
            } else {
                let rows = parts[0].shape()[0];
                let total_w: usize = parts.iter().map(|p| p.shape()[1]).sum();
                let mut off = 0;
                for p in parts {
                    let w = p.shape()[1];
                    if let Some(gp) = acc(grads, p) {
                        for r in 0..rows {
                            for j in 0..w {
                                gp[r * w + j] += g[r * total_w + off + j];
                            }
                        }
                    }
                    off += w;
                }
            }
        }
        Op::RowGather(a, indices) => {
            if let Some(ga) = acc(grads, a) {
                let width = match a.shape() {
                    [_] => 1,
                    [_, d] => *d,
                    _ => unreachable!(),
                };
                for (r, &i) in indices.iter().enumerate() {
                    for j in 0..width {
                        ga[i * width + j] += g[r * width + j];
                    }
                }
            }
        }
        Op::SegmentSum(a, segments) => {
            if let Some(ga) = acc(grads, a) {
                let width = match a.shape() {
                    [_] => 1,
                    [_, d] => *d,
                    _ => unreachable!(),
                };
                for (r, &s) in segments.iter().enumerate() {
                    for j in 0..width {
                        ga[r * width + j] += g[s * width + j];
                    }
                }
            }
        }
        Op::SegmentMean(a, segments, counts) => {
            if let Some(ga) = acc(grads, a) {
                let width = match a.shape() {
                    [_] => 1,
                    [_, d] => *d,
                    _ => unreachable!(),
                };
                for (r, &s) in segments.iter().enumerate() {
                    let inv = 1.0 / counts[s] as f64;
                    for j in 0..width {
                        ga[r * width + j] += g[s * width + j] * inv;
                    }
                }
            }
        }
        Op::ScaleRows(a, scales) => {
            let (n, d) = (a.shape()[0], a.shape()[1]);
            if let Some(ga) = acc(grads, a) {
                for i in 0..n {
                    let s = scales.data()[i];
                    for j in 0..d {
                        ga[i * d + j] += g[i * d + j] * s;
                    }
                }
            }
            if let Some(gs) = acc(grads, scales) {
                for i in 0..n {
                    let mut dot = 0.0;
                    for j in 0..d {
                        dot += g[i * d + j] * a.data()[i * d + j];
                    }
                    gs[i] += dot;
                }
            }
        }
        Op::AddBias(a, bias) => {
            let (n, d) = (a.shape()[0], a.shape()[1]);
            if let Some(ga) = acc(grads, a) {
                for (x, gi) in ga.iter_mut().zip(g) {
                    *x += gi;
                }
            }
            if let Some(gb) = acc(grads, bias) {
                for i in 0..n {
                    for j in 0..d {
                        gb[j] += g[i * d + j];
                    }
                }
            }
        }
        Op::SliceColumn(a, col) => {
            if let Some(ga) = acc(grads, a) {
                let (n, d) = (a.shape()[0], a.shape()[1]);
                for i in 0..n {
                    ga[i * d + col] += g[i];
                }
            }
        }
        Op::Reshape(a) => {
            if let Some(ga) = acc(grads, a) {
                for (x, gi) in ga.iter_mut().zip(g) {
                    *x += gi;
                }
            }
        }
    }
}
