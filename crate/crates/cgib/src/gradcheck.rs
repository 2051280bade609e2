//! Named finite-difference checks over every differentiable primitive and
//! the fully composed training objective.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datagen::random_permutation;
use crate::error::{Error, Result};
use crate::gnn::{GinConfig, Pooling};
use crate::graph::{batch, Batch, Graph};
use crate::losses::{self, LossParts, LossWeights};
use crate::model::{ModelConfig, ModelState};
use crate::tensor::{finite_difference_check, Tensor};

/// Relative-error tolerance every check must meet.
pub const TOLERANCE: f64 = 1e-4;
/// Central-difference step.
pub const STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub max_rel_err: f64,
    pub instances: usize,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= TOLERANCE
    }
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()
}

/// Random values kept away from the ReLU kink so central differences stay
/// one-sided.
fn rand_vec_off_kink(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let mut v: f64 = rng.gen_range(-2.0..2.0);
            if v.abs() < 0.05 {
                v += 0.1f64.copysign(v + f64::MIN_POSITIVE);
            }
            v
        })
        .collect()
}

fn rand_positive(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.2..2.5)).collect()
}

type CaseFn = Box<dyn Fn(&[Tensor]) -> Result<Tensor>>;

fn check_named(
    name: &str,
    seed: u64,
    instances: usize,
    make: impl Fn(&mut ChaCha8Rng) -> Result<(Vec<Tensor>, CaseFn)>,
) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(name.len() as u64 * 0x9e37));
    let mut max_rel_err: f64 = 0.0;
    for _ in 0..instances {
        // A random draw can land outside the objective's checkable domain:
        // a dead-ReLU graph pooling to an exactly zero row (rejected by the
        // contrastive loss), or a kink inside the probe radius flagged by
        // the case itself. Resample those instead of failing; instances with
        // wrong gradients still return a large error and fail loudly.
        let mut attempts = 0;
        let err = loop {
            let (params, f) = make(&mut rng)?;
            let probe = f(&params);
            let outcome = match probe {
                Ok(_) => finite_difference_check(|p| f(p), &params, STEP),
                Err(e) => Err(e),
            };
            match outcome {
                Ok(err) => break err,
                Err(Error::Degenerate(_)) if attempts < 32 => attempts += 1,
                Err(e) => return Err(e),
            }
        };
        max_rel_err = max_rel_err.max(err);
    }
    Ok(CheckResult {
        name: name.to_string(),
        max_rel_err,
        instances,
    })
}

/// Scalarize a tensor smoothly so the check exercises all its entries.
fn squash(t: Tensor) -> Result<Tensor> {
    t.square().mean()
}

/// Finite-difference checks for every differentiable primitive.
pub fn primitive_checks(seed: u64, instances: usize) -> Result<Vec<CheckResult>> {
    let mut results = Vec::new();
    let (m, k, n) = (3usize, 4usize, 3usize);

    results.push(check_named("matmul", seed, instances, |rng| {
        let a = Tensor::param(rand_vec(rng, m * k), &[m, k])?;
        let b = Tensor::param(rand_vec(rng, k * n), &[k, n])?;
        Ok((vec![a, b], Box::new(move |p: &[Tensor]| squash(p[0].matmul(&p[1])?)) as CaseFn))
    })?);
    results.push(check_named("add", seed, instances, |rng| {
        let a = Tensor::param(rand_vec(rng, m * k), &[m, k])?;
        let b = Tensor::param(rand_vec(rng, m * k), &[m, k])?;
        Ok((vec![a, b], Box::new(move |p: &[Tensor]| squash(p[0].add(&p[1])?)) as CaseFn))
    })?);
    results.push(check_named("sub", seed, instances, |rng| {
        let a = Tensor::param(rand_vec(rng, m * k), &[m, k])?;
        let b = Tensor::param(rand_vec(rng, m * k), &[m, k])?;
        Ok((vec![a, b], Box::new(move |p: &[Tensor]| squash(p[0].sub(&p[1])?)) as CaseFn))
    })?);
    results.push(check_named("elementwise_mul", seed, instances, |rng| {
        let a = Tensor::param(rand_vec(rng, m * k), &[m, k])?;
        let b = Tensor::param(rand_vec(rng, m * k), &[m, k])?;
        Ok((vec![a, b], Box::new(move |p: &[Tensor]| squash(p[0].mul(&p[1])?)) as CaseFn))
    })?);
    results.push(check_named("scalar_mul", seed, instances, |rng| {
        let a = Tensor::param(rand_vec(rng, m * k), &[m, k])?;
        let c: f64 = rng.gen_range(-2.0..2.0);
        Ok((vec![a], Box::new(move |p: &[Tensor]| squash(p[0].scalar_mul(c))) as CaseFn))
    })?);
    results.push(check_named("add_scalar", seed, instances, |rng| {
        let a = Tensor::param(rand_vec(rng, m * k), &[m, k])?;
        let c: f64 = rng.gen_range(-2.0..2.0);
        Ok((vec![a], Box::new(move |p: &[Tensor]| squash(p[0].add_scalar(c))) as CaseFn))
    })?);
    results.push(check_named("relu", seed, instances, |rng| {
        let a = Tensor::param(rand_vec_off_kink(rng, m * k), &[m, k])?;
        Ok((vec![a], Box::new(move |p: &[Tensor]| squash(p[0].relu())) as CaseFn))
    })?);
    results.push(check_named("sigmoid", seed, instances, |rng| {
        let a = Tensor::param(rand_vec(rng, m * k), &[m, k])?;
        Ok((vec![a], Box::new(move |p: &[Tensor]| squash(p[0].sigmoid())) as CaseFn))
    })?);
    results.push(check_named("exp", seed, instances, |rng| {
        let a = Tensor::param(rand_vec(rng, m * k), &[m, k])?;
        Ok((vec![a], Box::new(move |p: &[Tensor]| squash(p[0].exp())) as CaseFn))
    })?);
    results.push(check_named("log", seed, instances, |rng| {
        let a = Tensor::param(rand_positive(rng, m * k), &[m, k])?;
        Ok((vec![a], Box::new(move |p: &[Tensor]| squash(p[0].log())) as CaseFn))
    })?);
    results.push(check_named("square", seed, instances, |rng| {
        let a = Tensor::param(rand_vec(rng, m * k), &[m, k])?;
        Ok((vec![a], Box::new(move |p: &[Tensor]| p[0].square().mean()) as CaseFn))
    })?);
    results.push(check_named("softmax_last_dim", seed, instances, |rng| {
        let a = Tensor::param(rand_vec(rng, m * 5), &[m, 5])?;
        Ok((vec![a], Box::new(move |p: &[Tensor]| squash(p[0].softmax_last_dim()?)) as CaseFn))
    })?);
    results.push(check_named("sum", seed, instances, |rng| {
        let a = Tensor::param(rand_vec(rng, 7), &[7])?;
        Ok((vec![a], Box::new(move |p: &[Tensor]| p[0].square().sum()) as CaseFn))
    })?);
    results.push(check_named("mean", seed, instances, |rng| {
        let a = Tensor::param(rand_vec(rng, 7), &[7])?;
        Ok((vec![a], Box::new(move |p: &[Tensor]| p[0].exp().mean()) as CaseFn))
    })?);
    results.push(check_named("l2_norm_squared", seed, instances, |rng| {
        let a = Tensor::param(rand_vec(rng, m * k), &[m, k])?;
        Ok((vec![a], Box::new(move |p: &[Tensor]| p[0].l2_norm_squared()) as CaseFn))
    })?);
    results.push(check_named("cosine_similarity", seed, instances, |rng| {
        let a = Tensor::param(rand_vec_off_kink(rng, 6), &[6])?;
        let b = Tensor::param(rand_vec_off_kink(rng, 6), &[6])?;
        Ok((
            vec![a, b],
            Box::new(move |p: &[Tensor]| p[0].cosine_similarity(&p[1])) as CaseFn,
        ))
    })?);
    results.push(check_named("concat_last_dim", seed, instances, |rng| {
        let a = Tensor::param(rand_vec(rng, m * 2), &[m, 2])?;
        let b = Tensor::param(rand_vec(rng, m * 3), &[m, 3])?;
        Ok((
            vec![a, b],
            Box::new(move |p: &[Tensor]| squash(Tensor::concat_last_dim(&[&p[0], &p[1]])?)) as CaseFn,
        ))
    })?);
    results.push(check_named("row_gather", seed, instances, |rng| {
        let a = Tensor::param(rand_vec(rng, 5 * k), &[5, k])?;
        let idx: Vec<usize> = (0..7).map(|_| rng.gen_range(0..5)).collect();
        Ok((
            vec![a],
            Box::new(move |p: &[Tensor]| squash(p[0].row_gather(&idx)?)) as CaseFn,
        ))
    })?);
    results.push(check_named("segment_sum", seed, instances, |rng| {
        let a = Tensor::param(rand_vec(rng, 6 * k), &[6, k])?;
        let seg: Vec<usize> = (0..6).map(|_| rng.gen_range(0..3)).collect();
        Ok((
            vec![a],
            Box::new(move |p: &[Tensor]| squash(p[0].segment_sum(&seg, 3)?)) as CaseFn,
        ))
    })?);
    results.push(check_named("segment_mean", seed, instances, |rng| {
        let a = Tensor::param(rand_vec(rng, 6 * k), &[6, k])?;
        let mut seg: Vec<usize> = (0..6).map(|_| rng.gen_range(0..3)).collect();
        seg[0] = 0; // keep segment 0 nonempty
        Ok((
            vec![a],
            Box::new(move |p: &[Tensor]| squash(p[0].segment_mean(&seg, 3)?)) as CaseFn,
        ))
    })?);
    results.push(check_named("scale_rows", seed, instances, |rng| {
        let a = Tensor::param(rand_vec(rng, m * k), &[m, k])?;
        let s = Tensor::param(rand_vec(rng, m), &[m])?;
        Ok((
            vec![a, s],
            Box::new(move |p: &[Tensor]| squash(p[0].scale_rows(&p[1])?)) as CaseFn,
        ))
    })?);
    results.push(check_named("add_bias", seed, instances, |rng| {
        let a = Tensor::param(rand_vec(rng, m * k), &[m, k])?;
        let b = Tensor::param(rand_vec(rng, k), &[k])?;
        Ok((
            vec![a, b],
            Box::new(move |p: &[Tensor]| squash(p[0].add_bias(&p[1])?)) as CaseFn,
        ))
    })?);
    results.push(check_named("slice_column", seed, instances, |rng| {
        let a = Tensor::param(rand_vec(rng, m * k), &[m, k])?;
        let col = rng.gen_range(0..k);
        Ok((
            vec![a],
            Box::new(move |p: &[Tensor]| squash(p[0].slice_column(col)?)) as CaseFn,
        ))
    })?);
    results.push(check_named("reshape", seed, instances, |rng| {
        let a = Tensor::param(rand_vec(rng, m * k), &[m, k])?;
        Ok((
            vec![a],
            Box::new(move |p: &[Tensor]| squash(p[0].reshape(&[k, m])?)) as CaseFn,
        ))
    })?);
    results.push(check_named("logsumexp", seed, instances, |rng| {
        let a = Tensor::param(rand_vec(rng, 9), &[9])?;
        Ok((vec![a], Box::new(move |p: &[Tensor]| p[0].logsumexp()) as CaseFn))
    })?);
    Ok(results)
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Graph {
    let feats = (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.gen_bool(0.4) {
                edges.push((u, v));
            }
        }
    }
    Graph::new(n, feats, edges, rng.gen_range(-2.0..2.0), Default::default()).unwrap()
}

fn tiny_model(rng: &mut ChaCha8Rng, dim: usize) -> ModelState {
    ModelState::init(
        ModelConfig {
            feature_dim: dim,
            gin: GinConfig {
                num_layers: 2,
                hidden_dim: 6,
                epsilon: 0.0,
                pooling: Pooling::Mean,
            },
        },
        rng.gen(),
    )
    .unwrap()
}

/// The fully composed objective on a random two-graph batch, checked against
/// central finite differences over every model parameter.
///
/// Instances whose forward pass has a ReLU preactivation within `64 * STEP`
/// of zero are resampled: the loss is not differentiable there and a central
/// difference straddling the kink says nothing about the gradient. The
/// checked function is the loss scaled by 1e-2, which keeps rounding noise
/// on exactly-zero gradient coordinates (dead units) below the relative
/// error floor; the gradient of the scaled and unscaled loss carry the same
/// information.
pub fn composed_loss_check(seed: u64, instances: usize) -> Result<CheckResult> {
    const KINK_GUARD: f64 = 64.0 * STEP;
    const LOSS_SCALE: f64 = 1e-2;
    check_named("composed_objective", seed, instances, |rng| {
        let dim = 3;
        let graphs = vec![random_graph(rng, 4, dim), random_graph(rng, 5, dim)];
        let b: Batch = batch(&graphs)?;
        let template = tiny_model(rng, dim);
        let pairing = random_permutation(rng, b.num_graphs);
        let weights = LossWeights::default();
        let params: Vec<Tensor> = template.named().iter().map(|(_, t)| (*t).clone()).collect();

        let f = move |p: &[Tensor]| -> Result<Tensor> {
            let mut i = 0;
            let model = template.map(&mut |_, _| {
                let t = p[i].clone();
                i += 1;
                Ok(t)
            })?;
            let out = model.forward(&b)?;
            let y = b.targets_tensor();
            let parts = LossParts {
                l_cp: losses::l_cp(&out.mu_c, &y)?,
                l_sp: Some(losses::l_sp(&out.mu_s, &y)?),
                mi: Some(losses::mi_cg_proxy(&out.h_c)?),
                l_ci: Some(losses::l_ci_with(
                    &out.h_g,
                    &losses::mix(&out.h_c, &out.h_s, &pairing)?,
                    weights.tau,
                    weights.infonce_standard,
                )?),
            };
            let (total, _) = losses::compose_total(&parts, &weights)?;
            if total.min_relu_input_magnitude() < KINK_GUARD {
                return Err(crate::error::Error::Degenerate(
                    "relu preactivation inside the finite-difference guard band".into(),
                ));
            }
            Ok(total.scalar_mul(LOSS_SCALE))
        };
        Ok((params, Box::new(f) as CaseFn))
    })
}

/// Every primitive check plus the composed objective.
pub fn full_suite(seed: u64, primitive_instances: usize, composed_instances: usize) -> Result<Vec<CheckResult>> {
    let mut results = primitive_checks(seed, primitive_instances)?;
    results.push(composed_loss_check(seed, composed_instances)?);
    Ok(results)
}
