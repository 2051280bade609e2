//! Dense 64-bit float tensors with reverse-mode differentiation.
//!
//! Tensors are immutable after creation. Every differentiable operation
//! records its inputs and kind when at least one operand is tracked (a
//! parameter leaf or the result of a tracked operation), forming an
//! operation graph that [`Tensor::backward`] traverses in reverse
//! topological order. There is no broadcasting: shape coercions are
//! explicit ops (`scale_rows`, `add_bias`, `reshape`).

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};

mod backward;
mod fdcheck;

pub use backward::Gradients;
pub use fdcheck::finite_difference_check;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

/// Operation kinds recorded for differentiation.
pub(crate) enum Op {
    Matmul(Tensor, Tensor),
    Add(Tensor, Tensor),
    Sub(Tensor, Tensor),
    Mul(Tensor, Tensor),
    ScalarMul(Tensor, f64),
    AddScalar(Tensor),
    Relu(Tensor),
    Sigmoid(Tensor),
    Exp(Tensor),
    Log(Tensor),
    Square(Tensor),
    SoftmaxLastDim(Tensor),
    Sum(Tensor),
    Mean(Tensor),
    L2NormSquared(Tensor),
    CosineSimilarity(Tensor, Tensor),
    ConcatLastDim(Vec<Tensor>),
    RowGather(Tensor, Vec<usize>),
    SegmentSum(Tensor, Vec<usize>),
    /// Segment mean keeps the per-segment counts computed in the forward pass.
    SegmentMean(Tensor, Vec<usize>, Vec<usize>),
    ScaleRows(Tensor, Tensor),
    AddBias(Tensor, Tensor),
    SliceColumn(Tensor, usize),
    Reshape(Tensor),
}

impl Op {
    fn inputs(&self) -> Vec<&Tensor> {
        match self {
            Op::Matmul(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::CosineSimilarity(a, b)
            | Op::ScaleRows(a, b)
            | Op::AddBias(a, b) => vec![a, b],
            Op::ScalarMul(a, _)
            | Op::AddScalar(a)
            | Op::Relu(a)
            | Op::Sigmoid(a)
            | Op::Exp(a)
            | Op::Log(a)
            | Op::Square(a)
            | Op::SoftmaxLastDim(a)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::L2NormSquared(a)
            | Op::RowGather(a, _)
            | Op::SegmentSum(a, _)
            | Op::SegmentMean(a, _, _)
            | Op::SliceColumn(a, _)
            | Op::Reshape(a) => vec![a],
            Op::ConcatLastDim(parts) => parts.iter().collect(),
        }
    }
}

struct Node {
    id: u64,
    shape: Vec<usize>,
    data: Vec<f64>,
    op: Option<Op>,
    param: bool,
}

/// Dense row-major f64 tensor with optional differentiation provenance.
#[derive(Clone)]
pub struct Tensor {
    inner: Arc<Node>,
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.inner.shape)
            .field("tracked", &self.tracked())
            .finish()
    }
}

fn check_shape(data_len: usize, shape: &[usize]) -> Result<()> {
    let numel: usize = shape.iter().product();
    if numel != data_len {
        return Err(Error::InvalidShape(format!(
            "shape {:?} implies {} elements, got {}",
            shape, numel, data_len
        )));
    }
    Ok(())
}

impl Tensor {
    fn make(data: Vec<f64>, shape: Vec<usize>, op: Option<Op>, param: bool) -> Tensor {
        let id = NEXT_ID.fetch_add(1, Ordering::Relaxed);
        Tensor {
            inner: Arc::new(Node {
                id,
                shape,
                data,
                op,
                param,
            }),
        }
    }

    /// Constant tensor without provenance.
    pub fn from_vec(data: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        check_shape(data.len(), shape)?;
        Ok(Tensor::make(data, shape.to_vec(), None, false))
    }

    /// Tracked leaf tensor; gradients can be requested for it.
    pub fn param(data: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        check_shape(data.len(), shape)?;
        Ok(Tensor::make(data, shape.to_vec(), None, true))
    }

    /// Scalar constant with shape `[1]`.
    pub fn scalar(v: f64) -> Tensor {
        Tensor::make(vec![v], vec![1], None, false)
    }

    /// All-zero constant tensor.
    pub fn zeros(shape: &[usize]) -> Tensor {
        let numel: usize = shape.iter().product();
        Tensor::make(vec![0.0; numel], shape.to_vec(), None, false)
    }

    fn with_op(data: Vec<f64>, shape: Vec<usize>, op: Op) -> Tensor {
        debug_assert!(op.inputs().iter().all(|t| t.id() < NEXT_ID.load(Ordering::Relaxed)));
        Tensor::make(data, shape, Some(op), false)
    }

    /// Result of an op: provenance is recorded only when an operand is tracked.
    fn op_result(data: Vec<f64>, shape: Vec<usize>, op: Op) -> Tensor {
        if op.inputs().iter().any(|t| t.tracked()) {
            Tensor::with_op(data, shape, op)
        } else {
            Tensor::make(data, shape, None, false)
        }
    }

    pub(crate) fn id(&self) -> u64 {
        self.inner.id
    }

    pub(crate) fn op(&self) -> Option<&Op> {
        self.inner.op.as_ref()
    }

    /// True when this tensor participates in differentiation.
    pub fn tracked(&self) -> bool {
        self.inner.param || self.inner.op.is_some()
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.inner.data
    }

    pub fn len(&self) -> usize {
        self.inner.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.data.is_empty()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> Result<f64> {
        if self.len() != 1 {
            return Err(Error::Contract(format!(
                "item() requires a scalar, shape is {:?}",
                self.shape()
            )));
        }
        Ok(self.inner.data[0])
    }

    /// Constant copy sharing no provenance; useful for evaluation passes.
    pub fn detach(&self) -> Tensor {
        Tensor::make(self.inner.data.clone(), self.inner.shape.clone(), None, false)
    }

}

fn same_shape(a: &Tensor, b: &Tensor, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::InvalidShape(format!(
            "{what}: shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

fn non_empty(a: &Tensor, what: &str) -> Result<()> {
    if a.is_empty() {
        return Err(Error::Contract(format!("{what}: empty tensor")));
    }
    Ok(())
}

impl Tensor {
    /// Matrix product of `[m, k]` and `[k, n]`.
    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor> {
        let (&[m, k], &[k2, n]) = (self.shape(), rhs.shape()) else {
            return Err(Error::InvalidShape(format!(
                "matmul needs rank-2 operands, got {:?} and {:?}",
                self.shape(),
                rhs.shape()
            )));
        };
        if k != k2 {
            return Err(Error::InvalidShape(format!(
                "matmul inner dims differ: {:?} x {:?}",
                self.shape(),
                rhs.shape()
            )));
        }
        let mut out = vec![0.0; m * n];
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                self.data().as_ptr(),
                k as isize,
                1,
                rhs.data().as_ptr(),
                n as isize,
                1,
                0.0,
                out.as_mut_ptr(),
                n as isize,
                1,
            );
        }
        Ok(Tensor::op_result(
            out,
            vec![m, n],
            Op::Matmul(self.clone(), rhs.clone()),
        ))
    }

    /// Elementwise sum of same-shape tensors.
    pub fn add(&self, rhs: &Tensor) -> Result<Tensor> {
        same_shape(self, rhs, "add")?;
        let data = self
            .data()
            .iter()
            .zip(rhs.data())
            .map(|(a, b)| a + b)
            .collect();
        Ok(Tensor::op_result(
            data,
            self.shape().to_vec(),
            Op::Add(self.clone(), rhs.clone()),
        ))
    }

    /// Elementwise difference of same-shape tensors.
    pub fn sub(&self, rhs: &Tensor) -> Result<Tensor> {
        same_shape(self, rhs, "sub")?;
        let data = self
            .data()
            .iter()
            .zip(rhs.data())
            .map(|(a, b)| a - b)
            .collect();
        Ok(Tensor::op_result(
            data,
            self.shape().to_vec(),
            Op::Sub(self.clone(), rhs.clone()),
        ))
    }

    /// Elementwise product of same-shape tensors.
    pub fn mul(&self, rhs: &Tensor) -> Result<Tensor> {
        same_shape(self, rhs, "mul")?;
        let data = self
            .data()
            .iter()
            .zip(rhs.data())
            .map(|(a, b)| a * b)
            .collect();
        Ok(Tensor::op_result(
            data,
            self.shape().to_vec(),
            Op::Mul(self.clone(), rhs.clone()),
        ))
    }

    /// Multiply every element by a constant.
    pub fn scalar_mul(&self, c: f64) -> Tensor {
        let data = self.data().iter().map(|a| a * c).collect();
        Tensor::op_result(data, self.shape().to_vec(), Op::ScalarMul(self.clone(), c))
    }

    /// Add a constant to every element.
    pub fn add_scalar(&self, c: f64) -> Tensor {
        let data = self.data().iter().map(|a| a + c).collect();
        Tensor::op_result(data, self.shape().to_vec(), Op::AddScalar(self.clone()))
    }

    pub fn relu(&self) -> Tensor {
        let data = self.data().iter().map(|a| a.max(0.0)).collect();
        Tensor::op_result(data, self.shape().to_vec(), Op::Relu(self.clone()))
    }

    pub fn sigmoid(&self) -> Tensor {
        let data = self.data().iter().map(|a| 1.0 / (1.0 + (-a).exp())).collect();
        Tensor::op_result(data, self.shape().to_vec(), Op::Sigmoid(self.clone()))
    }

    pub fn exp(&self) -> Tensor {
        let data = self.data().iter().map(|a| a.exp()).collect();
        Tensor::op_result(data, self.shape().to_vec(), Op::Exp(self.clone()))
    }

    pub fn log(&self) -> Tensor {
        let data = self.data().iter().map(|a| a.ln()).collect();
        Tensor::op_result(data, self.shape().to_vec(), Op::Log(self.clone()))
    }

    pub fn square(&self) -> Tensor {
        let data = self.data().iter().map(|a| a * a).collect();
        Tensor::op_result(data, self.shape().to_vec(), Op::Square(self.clone()))
    }

    /// Row-wise softmax over the last dimension (rank 1 treated as one row).
    pub fn softmax_last_dim(&self) -> Result<Tensor> {
        non_empty(self, "softmax_last_dim")?;
        let (rows, width) = match self.shape() {
            [n] => (1usize, *n),
            [n, d] => (*n, *d),
            s => {
                return Err(Error::InvalidShape(format!(
                    "softmax_last_dim needs rank 1 or 2, got {:?}",
                    s
                )))
            }
        };
        let mut data = vec![0.0; self.len()];
        let src = self.data();
        for r in 0..rows {
            let row = &src[r * width..(r + 1) * width];
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (j, &v) in row.iter().enumerate() {
                let e = (v - m).exp();
                data[r * width + j] = e;
                sum += e;
            }
            for j in 0..width {
                data[r * width + j] /= sum;
            }
        }
        Ok(Tensor::op_result(
            data,
            self.shape().to_vec(),
            Op::SoftmaxLastDim(self.clone()),
        ))
    }

    /// Sum of all elements, as a `[1]` tensor.
    pub fn sum(&self) -> Result<Tensor> {
        non_empty(self, "sum")?;
        let s: f64 = self.data().iter().sum();
        Ok(Tensor::op_result(vec![s], vec![1], Op::Sum(self.clone())))
    }

    /// Mean of all elements, as a `[1]` tensor.
    pub fn mean(&self) -> Result<Tensor> {
        non_empty(self, "mean")?;
        let s: f64 = self.data().iter().sum();
        let n = self.len() as f64;
        Ok(Tensor::op_result(vec![s / n], vec![1], Op::Mean(self.clone())))
    }

    /// Sum of squared elements, as a `[1]` tensor.
    pub fn l2_norm_squared(&self) -> Result<Tensor> {
        non_empty(self, "l2_norm_squared")?;
        let s: f64 = self.data().iter().map(|a| a * a).sum();
        Ok(Tensor::op_result(
            vec![s],
            vec![1],
            Op::L2NormSquared(self.clone()),
        ))
    }

    /// Cosine similarity of two equal-length tensors (flattened), as `[1]`.
    pub fn cosine_similarity(&self, rhs: &Tensor) -> Result<Tensor> {
        if self.len() != rhs.len() || self.is_empty() {
            return Err(Error::InvalidShape(format!(
                "cosine_similarity: lengths {} and {} must match and be nonzero",
                self.len(),
                rhs.len()
            )));
        }
        let na: f64 = self.data().iter().map(|a| a * a).sum::<f64>().sqrt();
        let nb: f64 = rhs.data().iter().map(|b| b * b).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            return Err(Error::Degenerate(
                "cosine_similarity of a zero-norm vector".into(),
            ));
        }
        let dot: f64 = self
            .data()
            .iter()
            .zip(rhs.data())
            .map(|(a, b)| a * b)
            .sum();
        Ok(Tensor::op_result(
            vec![dot / (na * nb)],
            vec![1],
            Op::CosineSimilarity(self.clone(), rhs.clone()),
        ))
    }

    /// Concatenate along the last dimension. Rank-1 inputs concatenate into a
    /// longer vector; rank-2 inputs must agree on the number of rows.
    pub fn concat_last_dim(parts: &[&Tensor]) -> Result<Tensor> {
        if parts.is_empty() {
            return Err(Error::Contract("concat_last_dim: no inputs".into()));
        }
        let rank = parts[0].shape().len();
        if !(rank == 1 || rank == 2) || parts.iter().any(|p| p.shape().len() != rank) {
            return Err(Error::InvalidShape(
                "concat_last_dim: all inputs must share rank 1 or 2".into(),
            ));
        }
        if rank == 1 {
            let total: usize = parts.iter().map(|p| p.len()).sum();
            let mut data = Vec::with_capacity(total);
            for p in parts {
                data.extend_from_slice(p.data());
            }
            return Ok(Tensor::op_result(
                data,
                vec![total],
                Op::ConcatLastDim(parts.iter().map(|p| (*p).clone()).collect()),
            ));
        }
        let rows = parts[0].shape()[0];
        if parts.iter().any(|p| p.shape()[0] != rows) {
            return Err(Error::InvalidShape(
                "concat_last_dim: row counts differ".into(),
            ));
        }
        let widths: Vec<usize> = parts.iter().map(|p| p.shape()[1]).collect();
        let total_w: usize = widths.iter().sum();
        let mut data = vec![0.0; rows * total_w];
        for r in 0..rows {
            let mut off = 0;
            for (p, &w) in parts.iter().zip(&widths) {
                data[r * total_w + off..r * total_w + off + w]
                    .copy_from_slice(&p.data()[r * w..(r + 1) * w]);
                off += w;
            }
        }
        Ok(Tensor::op_result(
            data,
            vec![rows, total_w],
            Op::ConcatLastDim(parts.iter().map(|p| (*p).clone()).collect()),
        ))
    }

    /// Gather rows by index; `[n, d]` gathered with `k` indices gives `[k, d]`.
    pub fn row_gather(&self, indices: &[usize]) -> Result<Tensor> {
        let (rows, width) = self.rows_width_checked("row_gather")?;
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return Err(Error::Index(format!(
                "row_gather: index {bad} out of {rows} rows"
            )));
        }
        let mut data = vec![0.0; indices.len() * width];
        for (r, &i) in indices.iter().enumerate() {
            data[r * width..(r + 1) * width]
                .copy_from_slice(&self.data()[i * width..(i + 1) * width]);
        }
        let shape = match self.shape() {
            [_] => vec![indices.len()],
            [_, d] => vec![indices.len(), *d],
            _ => unreachable!(),
        };
        Ok(Tensor::op_result(
            data,
            shape,
            Op::RowGather(self.clone(), indices.to_vec()),
        ))
    }

    fn rows_width_checked(&self, what: &str) -> Result<(usize, usize)> {
        match self.shape() {
            [n] => Ok((*n, 1)),
            [n, d] => Ok((*n, *d)),
            s => Err(Error::InvalidShape(format!(
                "{what} needs rank 1 or 2, got {:?}",
                s
            ))),
        }
    }

    fn segment_prepare(
        &self,
        segments: &[usize],
        num_segments: usize,
        what: &str,
    ) -> Result<(usize, usize)> {
        let (rows, width) = self.rows_width_checked(what)?;
        if segments.len() != rows {
            return Err(Error::InvalidShape(format!(
                "{what}: {} segment ids for {} rows",
                segments.len(),
                rows
            )));
        }
        if let Some(&bad) = segments.iter().find(|&&s| s >= num_segments) {
            return Err(Error::Index(format!(
                "{what}: segment id {bad} out of {num_segments}"
            )));
        }
        Ok((rows, width))
    }

    /// Sum rows into `num_segments` buckets given per-row segment ids.
    pub fn segment_sum(&self, segments: &[usize], num_segments: usize) -> Result<Tensor> {
        let (rows, width) = self.segment_prepare(segments, num_segments, "segment_sum")?;
        let mut data = vec![0.0; num_segments * width];
        for r in 0..rows {
            let s = segments[r];
            for j in 0..width {
                data[s * width + j] += self.data()[r * width + j];
            }
        }
        let shape = match self.shape() {
            [_] => vec![num_segments],
            [_, d] => vec![num_segments, *d],
            _ => unreachable!(),
        };
        Ok(Tensor::op_result(
            data,
            shape,
            Op::SegmentSum(self.clone(), segments.to_vec()),
        ))
    }

    /// Mean of rows per segment; empty segments produce zero rows.
    pub fn segment_mean(&self, segments: &[usize], num_segments: usize) -> Result<Tensor> {
        let (rows, width) = self.segment_prepare(segments, num_segments, "segment_mean")?;
        let mut counts = vec![0usize; num_segments];
        for &s in segments {
            counts[s] += 1;
        }
        let mut data = vec![0.0; num_segments * width];
        for r in 0..rows {
            let s = segments[r];
            for j in 0..width {
                data[s * width + j] += self.data()[r * width + j];
            }
        }
        for s in 0..num_segments {
            if counts[s] > 0 {
                let inv = 1.0 / counts[s] as f64;
                for j in 0..width {
                    data[s * width + j] *= inv;
                }
            }
        }
        let shape = match self.shape() {
            [_] => vec![num_segments],
            [_, d] => vec![num_segments, *d],
            _ => unreachable!(),
        };
        Ok(Tensor::op_result(
            data,
            shape,
            Op::SegmentMean(self.clone(), segments.to_vec(), counts),
        ))
    }

    /// Multiply row `i` of a `[n, d]` matrix by `scales[i]`.
    pub fn scale_rows(&self, scales: &Tensor) -> Result<Tensor> {
        let &[n, d] = self.shape() else {
            return Err(Error::InvalidShape(format!(
                "scale_rows needs a rank-2 tensor, got {:?}",
                self.shape()
            )));
        };
        if scales.shape() != [n] {
            return Err(Error::InvalidShape(format!(
                "scale_rows: scales shape {:?}, expected [{n}]",
                scales.shape()
            )));
        }
        let mut data = vec![0.0; n * d];
        for i in 0..n {
            let s = scales.data()[i];
            for j in 0..d {
                data[i * d + j] = self.data()[i * d + j] * s;
            }
        }
        Ok(Tensor::op_result(
            data,
            vec![n, d],
            Op::ScaleRows(self.clone(), scales.clone()),
        ))
    }

    /// Add a `[d]` bias vector to every row of a `[n, d]` matrix.
    pub fn add_bias(&self, bias: &Tensor) -> Result<Tensor> {
        let &[n, d] = self.shape() else {
            return Err(Error::InvalidShape(format!(
                "add_bias needs a rank-2 tensor, got {:?}",
                self.shape()
            )));
        };
        if bias.shape() != [d] {
            return Err(Error::InvalidShape(format!(
                "add_bias: bias shape {:?}, expected [{d}]",
                bias.shape()
            )));
        }
        let mut data = vec![0.0; n * d];
        for i in 0..n {
            for j in 0..d {
                data[i * d + j] = self.data()[i * d + j] + bias.data()[j];
            }
        }
        Ok(Tensor::op_result(
            data,
            vec![n, d],
            Op::AddBias(self.clone(), bias.clone()),
        ))
    }

    /// Extract column `j` of a `[n, d]` matrix as a `[n]` vector.
    pub fn slice_column(&self, j: usize) -> Result<Tensor> {
        let &[n, d] = self.shape() else {
            return Err(Error::InvalidShape(format!(
                "slice_column needs a rank-2 tensor, got {:?}",
                self.shape()
            )));
        };
        if j >= d {
            return Err(Error::Index(format!("slice_column: column {j} out of {d}")));
        }
        let data = (0..n).map(|i| self.data()[i * d + j]).collect();
        Ok(Tensor::op_result(
            data,
            vec![n],
            Op::SliceColumn(self.clone(), j),
        ))
    }

    /// Reinterpret the flat data under a new shape with the same element count.
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        check_shape(self.len(), shape)?;
        Ok(Tensor::op_result(
            self.data().to_vec(),
            shape.to_vec(),
            Op::Reshape(self.clone()),
        ))
    }

    /// Gradients of a scalar loss with respect to the given parameters.
    /// Parameters not reached by the loss graph get zero gradients.
    pub fn backward(&self, params: &[&Tensor]) -> Result<Gradients> {
        backward::run(self, params)
    }

    /// Numerically stable log-sum-exp over all elements, as a `[1]` tensor.
    ///
    /// The max shift cancels analytically, so recording it as a constant
    /// offset keeps the gradient exact (softmax of the inputs).
    pub fn logsumexp(&self) -> Result<Tensor> {
        non_empty(self, "logsumexp")?;
        let m = self.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(self.add_scalar(-m).exp().sum()?.log().add_scalar(m))
    }

    /// Smallest |x| over every element feeding a ReLU anywhere in this
    /// tensor's operation graph; infinity when no ReLU is involved. Lets
    /// finite-difference harnesses reject instances whose loss is not
    /// differentiable within the probe step.
    pub(crate) fn min_relu_input_magnitude(&self) -> f64 {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        let mut min_mag = f64::INFINITY;
        while let Some(t) = stack.pop() {
            if !seen.insert(t.id()) {
                continue;
            }
            if let Some(op) = t.op() {
                if let Op::Relu(input) = op {
                    for v in input.data() {
                        min_mag = min_mag.min(v.abs());
                    }
                }
                for input in op.inputs() {
                    if input.tracked() && !seen.contains(&input.id()) {
                        stack.push(input.clone());
                    }
                }
            }
        }
        min_mag
    }

    /// Test-only constructor that records an arbitrary provenance for `data`.
    /// Lets tests wire a value to a wrong backward rule on purpose.
    #[cfg(test)]
    pub(crate) fn with_forged_op(data: Vec<f64>, shape: &[usize], op: Op) -> Tensor {
        Tensor::with_op(data, shape.to_vec(), op)
    }
}

#[cfg(test)]
mod tests;
