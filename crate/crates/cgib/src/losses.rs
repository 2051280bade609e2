//! Training objectives.
//!
//! The minimized total is
//! `l_cp + alpha * l_reg + beta * l_sp + lambda * l_ci`, where
//!
//! - `l_cp` / `l_sp` are mean squared errors of the causal and confounding
//!   heads (the confounding head is trained to be predictive, not noise),
//! - `l_reg` is the compression proxy `(1/B) sum_i 0.5 * ||H_c_i||^2`
//!   (doubled when `mi_half` is false),
//! - `l_ci` is a contrastive loss aligning each original-graph representation
//!   with its causal representation mixed with a randomly paired confounding
//!   representation, against the other graphs in the batch as negatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Loss hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Weight on the compression proxy.
    pub alpha: f64,
    /// Weight on the confounding prediction loss.
    pub beta: f64,
    /// Weight on the contrastive intervention loss.
    pub lambda: f64,
    /// Similarity temperature.
    pub tau: f64,
    /// Use the proxy with its 1/2 factor as-is (true) or doubled (false).
    pub mi_half: bool,
    /// Include the positive pair in the contrastive denominator.
    pub infonce_standard: bool,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha: 0.5,
            beta: 0.5,
            lambda: 0.5,
            tau: 1.0,
            mi_half: true,
            infonce_standard: false,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || self.beta < 0.0 || self.lambda < 0.0 {
            return Err(Error::Validation("loss weights must be >= 0".into()));
        }
        if !(self.tau > 0.0) {
            return Err(Error::Validation("tau must be > 0".into()));
        }
        Ok(())
    }
}

/// Scalar values of the loss components for one step or epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub total: f64,
    pub l_cp: f64,
    pub l_sp: f64,
    /// Compression term as it enters the total (already doubled when
    /// `mi_half` is false); 0 when the term is ablated.
    pub l_reg: f64,
    pub l_ci: f64,
}

fn mse(mu: &Tensor, y: &Tensor, what: &str) -> Result<Tensor> {
    if mu.shape() != y.shape() || mu.shape().len() != 1 {
        return Err(Error::InvalidShape(format!(
            "{what}: predictions {:?} vs targets {:?}",
            mu.shape(),
            y.shape()
        )));
    }
    if mu.is_empty() {
        return Err(Error::Contract(format!("{what}: empty batch")));
    }
    mu.sub(y)?.square().mean()
}

/// Mean squared error of the causal head.
pub fn l_cp(mu_c: &Tensor, y: &Tensor) -> Result<Tensor> {
    mse(mu_c, y, "l_cp")
}

/// Mean squared error of the confounding head.
pub fn l_sp(mu_s: &Tensor, y: &Tensor) -> Result<Tensor> {
    mse(mu_s, y, "l_sp")
}

/// Batch estimate of the compression upper bound:
/// `(1/B) sum_i 0.5 * ||H_c_i||^2`.
pub fn mi_cg_proxy(h_c: &Tensor) -> Result<Tensor> {
    let &[b, _] = h_c.shape() else {
        return Err(Error::InvalidShape(format!(
            "mi_cg_proxy needs [B, hidden], got {:?}",
            h_c.shape()
        )));
    };
    if b == 0 {
        return Err(Error::Contract("mi_cg_proxy: empty batch".into()));
    }
    Ok(h_c.l2_norm_squared()?.scalar_mul(0.5 / b as f64))
}

fn check_permutation(pairing: &[usize], b: usize) -> Result<()> {
    if pairing.len() != b {
        return Err(Error::Validation(format!(
            "pairing length {} for batch of {b}",
            pairing.len()
        )));
    }
    let mut seen = vec![false; b];
    for &j in pairing {
        if j >= b || seen[j] {
            return Err(Error::Validation("pairing is not a permutation".into()));
        }
        seen[j] = true;
    }
    Ok(())
}

/// Mixed representations `H_mix[i] = H_c[i] + H_s[pairing[i]]`.
pub fn mix(h_c: &Tensor, h_s: &Tensor, pairing: &[usize]) -> Result<Tensor> {
    if h_c.shape() != h_s.shape() || h_c.shape().len() != 2 {
        return Err(Error::InvalidShape(format!(
            "mix: shapes {:?} and {:?}",
            h_c.shape(),
            h_s.shape()
        )));
    }
    check_permutation(pairing, h_c.shape()[0])?;
    h_c.add(&h_s.row_gather(pairing)?)
}

/// Contrastive causal-intervention loss with the denominator exactly as
/// printed: negatives are the other graphs in the batch and the positive
/// pair is not added. `l_ci_with` can switch to the standard form.
pub fn l_ci(h_g: &Tensor, h_mix: &Tensor, tau: f64) -> Result<Tensor> {
    l_ci_with(h_g, h_mix, tau, false)
}

/// Contrastive loss; with `include_positive` the positive pair also appears
/// in the denominator (conventional InfoNCE).
pub fn l_ci_with(h_g: &Tensor, h_mix: &Tensor, tau: f64, include_positive: bool) -> Result<Tensor> {
    if h_g.shape() != h_mix.shape() || h_g.shape().len() != 2 {
        return Err(Error::InvalidShape(format!(
            "l_ci: shapes {:?} and {:?}",
            h_g.shape(),
            h_mix.shape()
        )));
    }
    let (b, hidden) = (h_g.shape()[0], h_g.shape()[1]);
    if b < 2 {
        return Err(Error::Contract("l_ci needs a batch of at least 2".into()));
    }
    if !(tau > 0.0) {
        return Err(Error::Contract("l_ci: tau must be > 0".into()));
    }
    for (name, t) in [("h_g", h_g), ("h_mix", h_mix)] {
        for i in 0..b {
            let row = &t.data()[i * hidden..(i + 1) * hidden];
            if row.iter().all(|&v| v == 0.0) {
                return Err(Error::Degenerate(format!("{name} row {i} has zero norm")));
            }
        }
    }

    let inv_tau = 1.0 / tau;
    let g_rows: Vec<Tensor> = (0..b)
        .map(|i| h_g.row_gather(&[i]))
        .collect::<Result<Vec<_>>>()?;
    let mut terms = Vec::with_capacity(b);
    for i in 0..b {
        let mix_row = h_mix.row_gather(&[i])?;
        let pos = g_rows[i].cosine_similarity(&mix_row)?.scalar_mul(inv_tau);
        let mut negatives = Vec::with_capacity(b);
        if include_positive {
            negatives.push(pos.clone());
        }
        for (k, row) in g_rows.iter().enumerate() {
            if k != i {
                negatives.push(g_rows[i].cosine_similarity(row)?.scalar_mul(inv_tau));
            }
        }
        let refs: Vec<&Tensor> = negatives.iter().collect();
        let lse = Tensor::concat_last_dim(&refs)?.logsumexp()?;
        terms.push(pos.sub(&lse)?);
    }
    let refs: Vec<&Tensor> = terms.iter().collect();
    Ok(Tensor::concat_last_dim(&refs)?
        .sum()?
        .scalar_mul(-1.0 / b as f64))
}

/// Loss tensors entering the total. A component may be omitted only when its
/// weight is zero; omitted components report as 0.
pub struct LossParts {
    pub l_cp: Tensor,
    pub l_sp: Option<Tensor>,
    pub mi: Option<Tensor>,
    pub l_ci: Option<Tensor>,
}

/// Weighted total `l_cp + alpha*l_reg + beta*l_sp + lambda*l_ci` plus the
/// per-component report.
pub fn compose_total(parts: &LossParts, weights: &LossWeights) -> Result<(Tensor, LossReport)> {
    weights.validate()?;
    let mut total = parts.l_cp.clone();
    let l_cp_val = parts.l_cp.item()?;
    let mut l_reg_val = 0.0;
    let mut l_sp_val = 0.0;
    let mut l_ci_val = 0.0;

    if weights.alpha > 0.0 {
        let mi = parts.mi.as_ref().ok_or_else(|| {
            Error::Contract("compose_total: alpha > 0 but no compression term".into())
        })?;
        let factor = if weights.mi_half { 1.0 } else { 2.0 };
        let l_reg = mi.scalar_mul(factor);
        l_reg_val = l_reg.item()?;
        total = total.add(&l_reg.scalar_mul(weights.alpha))?;
    }
    if weights.beta > 0.0 {
        let l_sp = parts
            .l_sp
            .as_ref()
            .ok_or_else(|| Error::Contract("compose_total: beta > 0 but no l_sp".into()))?;
        l_sp_val = l_sp.item()?;
        total = total.add(&l_sp.scalar_mul(weights.beta))?;
    }
    if weights.lambda > 0.0 {
        let l_ci = parts
            .l_ci
            .as_ref()
            .ok_or_else(|| Error::Contract("compose_total: lambda > 0 but no l_ci".into()))?;
        l_ci_val = l_ci.item()?;
        total = total.add(&l_ci.scalar_mul(weights.lambda))?;
    }

    let report = LossReport {
        total: total.item()?,
        l_cp: l_cp_val,
        l_sp: l_sp_val,
        l_reg: l_reg_val,
        l_ci: l_ci_val,
    };
    Ok((total, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::finite_difference_check;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_rows(rng: &mut ChaCha8Rng, b: usize, h: usize) -> Vec<Vec<f64>> {
        (0..b)
            .map(|_| (0..h).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect()
    }

    fn tensor_of(rows: &[Vec<f64>]) -> Tensor {
        let h = rows[0].len();
        Tensor::from_vec(rows.concat(), &[rows.len(), h]).unwrap()
    }

    fn cos(x: &[f64], y: &[f64]) -> f64 {
        let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let nx: f64 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        let ny: f64 = y.iter().map(|a| a * a).sum::<f64>().sqrt();
        dot / (nx * ny)
    }

    /// Independent oracle: plain nested loops, naive exponentials.
    fn l_ci_brute(hg: &[Vec<f64>], hmix: &[Vec<f64>], tau: f64, standard: bool) -> f64 {
        let b = hg.len();
        let mut total = 0.0;
        for i in 0..b {
            let pos = cos(&hg[i], &hmix[i]) / tau;
            let mut den = 0.0;
            if standard {
                den += pos.exp();
            }
            for k in 0..b {
                if k != i {
                    den += (cos(&hg[i], &hg[k]) / tau).exp();
                }
            }
            total += (pos.exp() / den).ln();
        }
        -total / b as f64
    }

    #[test]
    fn l_cp_examples() {
        let y = Tensor::from_vec(vec![1.0, -1.0], &[2]).unwrap();
        assert_eq!(l_cp(&y, &y).unwrap().item().unwrap(), 0.0);

        let mu = Tensor::from_vec(vec![0.0, 0.0], &[2]).unwrap();
        assert_eq!(l_cp(&mu, &y).unwrap().item().unwrap(), 1.0);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mu_v: Vec<f64> = (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let y_v: Vec<f64> = (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let brute: f64 = mu_v
            .iter()
            .zip(&y_v)
            .map(|(m, t)| (t - m) * (t - m))
            .sum::<f64>()
            / 5.0;
        let got = l_cp(
            &Tensor::from_vec(mu_v, &[5]).unwrap(),
            &Tensor::from_vec(y_v, &[5]).unwrap(),
        )
        .unwrap()
        .item()
        .unwrap();
        assert!((got - brute).abs() < 1e-12);
    }

    #[test]
    fn l_sp_examples() {
        let mu = Tensor::from_vec(vec![2.0], &[1]).unwrap();
        let y = Tensor::from_vec(vec![0.0], &[1]).unwrap();
        assert_eq!(l_sp(&mu, &y).unwrap().item().unwrap(), 4.0);
        assert_eq!(l_sp(&y, &y).unwrap().item().unwrap(), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mu_v: Vec<f64> = (0..7).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let y_v: Vec<f64> = (0..7).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let brute: f64 = mu_v
            .iter()
            .zip(&y_v)
            .map(|(m, t)| (t - m) * (t - m))
            .sum::<f64>()
            / 7.0;
        let got = l_sp(
            &Tensor::from_vec(mu_v, &[7]).unwrap(),
            &Tensor::from_vec(y_v, &[7]).unwrap(),
        )
        .unwrap()
        .item()
        .unwrap();
        assert!((got - brute).abs() < 1e-12);
    }

    #[test]
    fn empty_batch_is_a_contract_error() {
        let empty = Tensor::from_vec(vec![], &[0]).unwrap();
        assert!(matches!(l_cp(&empty, &empty), Err(Error::Contract(_))));
    }

    #[test]
    fn mi_proxy_examples() {
        let zeros = Tensor::zeros(&[3, 4]);
        assert_eq!(mi_cg_proxy(&zeros).unwrap().item().unwrap(), 0.0);

        let row = Tensor::from_vec(vec![3.0, 4.0], &[1, 2]).unwrap();
        assert_eq!(mi_cg_proxy(&row).unwrap().item().unwrap(), 12.5);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows = rand_rows(&mut rng, 3, 5);
        let brute: f64 = rows
            .iter()
            .map(|r| 0.5 * r.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            / 3.0;
        let got = mi_cg_proxy(&tensor_of(&rows)).unwrap().item().unwrap();
        assert!((got - brute).abs() < 1e-12);
    }

    #[test]
    fn mi_proxy_is_nonnegative_and_zero_only_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let rows = rand_rows(&mut rng, 4, 3);
            let v = mi_cg_proxy(&tensor_of(&rows)).unwrap().item().unwrap();
            assert!(v >= 0.0);
            if rows.iter().flatten().any(|&x| x != 0.0) {
                assert!(v > 0.0);
            }
        }
    }

    #[test]
    fn mix_examples() {
        let h_c = tensor_of(&[vec![1.0, 2.0], vec![-1.0, 0.5]]);
        let zeros = Tensor::zeros(&[2, 2]);
        let identity = mix(&h_c, &zeros, &[0, 1]).unwrap();
        assert_eq!(identity.data(), h_c.data());

        let h_s = tensor_of(&[vec![9.0, 9.0], vec![0.5, -1.0]]);
        let mixed = mix(&h_c, &h_s, &[1, 0]).unwrap();
        assert_eq!(&mixed.data()[0..2], &[1.5, 1.0]);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let hc = rand_rows(&mut rng, 4, 3);
        let hs = rand_rows(&mut rng, 4, 3);
        let pairing = [2usize, 0, 3, 1];
        let m = mix(&tensor_of(&hc), &tensor_of(&hs), &pairing).unwrap();
        for i in 0..4 {
            for j in 0..3 {
                let want = hc[i][j] + hs[pairing[i]][j];
                assert!((m.data()[i * 3 + j] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mix_rejects_non_permutations() {
        let h = tensor_of(&rand_rows(&mut ChaCha8Rng::seed_from_u64(6), 3, 2));
        assert!(matches!(mix(&h, &h, &[0, 0, 1]), Err(Error::Validation(_))));
        assert!(matches!(mix(&h, &h, &[0, 1]), Err(Error::Validation(_))));
        assert!(matches!(mix(&h, &h, &[0, 1, 5]), Err(Error::Validation(_))));
    }

    #[test]
    fn l_ci_is_zero_when_positive_equals_negative_similarity() {
        // All four rows identical: every cosine is 1.
        let row = vec![0.3, -0.7, 1.1];
        let h = tensor_of(&[row.clone(), row.clone()]);
        let v = l_ci(&h, &h, 1.0).unwrap().item().unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn l_ci_perfect_alignment_with_orthogonal_negatives_is_minus_one() {
        let h_g = tensor_of(&[vec![1.0, 0.0], vec![0.0, 2.0]]);
        let v = l_ci(&h_g, &h_g, 1.0).unwrap().item().unwrap();
        assert!((v - (-1.0)).abs() < 1e-12);
    }

    #[test]
    fn l_ci_matches_brute_force_for_small_batches() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for b in [2usize, 3, 4] {
            for &tau in &[1.0, 0.5] {
                let hg = rand_rows(&mut rng, b, 5);
                let hm = rand_rows(&mut rng, b, 5);
                let got = l_ci(&tensor_of(&hg), &tensor_of(&hm), tau)
                    .unwrap()
                    .item()
                    .unwrap();
                let want = l_ci_brute(&hg, &hm, tau, false);
                assert!((got - want).abs() < 1e-10, "B={b} tau={tau}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn standard_denominator_matches_its_own_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let hg = rand_rows(&mut rng, 4, 5);
        let hm = rand_rows(&mut rng, 4, 5);
        let got = l_ci_with(&tensor_of(&hg), &tensor_of(&hm), 0.7, true)
            .unwrap()
            .item()
            .unwrap();
        let want = l_ci_brute(&hg, &hm, 0.7, true);
        assert!((got - want).abs() < 1e-10);
        // Standard form is strictly larger: the denominator gains a term.
        let verbatim = l_ci(&tensor_of(&hg), &tensor_of(&hm), 0.7)
            .unwrap()
            .item()
            .unwrap();
        assert!(got > verbatim);
    }

    #[test]
    fn l_ci_is_invariant_to_rescaling_a_single_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let hg = rand_rows(&mut rng, 4, 6);
        let hm = rand_rows(&mut rng, 4, 6);
        let base = l_ci(&tensor_of(&hg), &tensor_of(&hm), 0.8)
            .unwrap()
            .item()
            .unwrap();
        let mut scaled = hg.clone();
        for v in &mut scaled[2] {
            *v *= 37.5;
        }
        let after = l_ci(&tensor_of(&scaled), &tensor_of(&hm), 0.8)
            .unwrap()
            .item()
            .unwrap();
        assert!((base - after).abs() < 1e-10);
    }

    #[test]
    fn l_ci_contract_and_degenerate_errors() {
        let one = tensor_of(&[vec![1.0, 0.0]]);
        assert!(matches!(l_ci(&one, &one, 1.0), Err(Error::Contract(_))));

        let h = tensor_of(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        let ok = tensor_of(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(l_ci(&h, &ok, 1.0), Err(Error::Degenerate(_))));
        assert!(matches!(l_ci(&ok, &h, 1.0), Err(Error::Degenerate(_))));

        assert!(matches!(l_ci(&ok, &ok, 0.0), Err(Error::Contract(_))));
    }

    #[test]
    fn l_ci_gradient_matches_finite_differences_on_fixed_embeddings() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let hg = Tensor::param(
            (0..4 * 5).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            &[4, 5],
        )
        .unwrap();
        let hm = Tensor::param(
            (0..4 * 5).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            &[4, 5],
        )
        .unwrap();
        let err = finite_difference_check(|p| l_ci(&p[0], &p[1], 0.7), &[hg, hm], 1e-5).unwrap();
        assert!(err <= 1e-5, "l_ci fd error {err}");
    }

    #[test]
    fn compose_total_examples() {
        let zero = Tensor::scalar(0.0);
        let parts = LossParts {
            l_cp: zero.clone(),
            l_sp: Some(zero.clone()),
            mi: Some(zero.clone()),
            l_ci: Some(zero.clone()),
        };
        let (total, report) = compose_total(&parts, &LossWeights::default()).unwrap();
        assert_eq!(total.item().unwrap(), 0.0);
        assert_eq!(report.total, 0.0);

        // Pure prediction limit.
        let parts = LossParts {
            l_cp: Tensor::scalar(0.75),
            l_sp: None,
            mi: None,
            l_ci: None,
        };
        let w = LossWeights {
            alpha: 0.0,
            beta: 0.0,
            lambda: 0.0,
            ..LossWeights::default()
        };
        let (total, report) = compose_total(&parts, &w).unwrap();
        assert_eq!(total.item().unwrap(), 0.75);
        assert_eq!(report.l_sp, 0.0);
        assert_eq!(report.l_reg, 0.0);
        assert_eq!(report.l_ci, 0.0);

        // Hand arithmetic: 1.0 + 0.5*0.3 + 0.5*0.2 + 0.5*(-0.4) = 1.05.
        let parts = LossParts {
            l_cp: Tensor::scalar(1.0),
            l_sp: Some(Tensor::scalar(0.2)),
            mi: Some(Tensor::scalar(0.3)),
            l_ci: Some(Tensor::scalar(-0.4)),
        };
        let (total, report) = compose_total(&parts, &LossWeights::default()).unwrap();
        assert!((total.item().unwrap() - 1.05).abs() < 1e-15);
        assert!(
            (report.total - (report.l_cp + 0.5 * report.l_reg + 0.5 * report.l_sp + 0.5 * report.l_ci))
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn mi_half_flag_doubles_the_reported_compression_term() {
        let parts = LossParts {
            l_cp: Tensor::scalar(0.0),
            l_sp: None,
            mi: Some(Tensor::scalar(0.3)),
            l_ci: None,
        };
        let w = LossWeights {
            beta: 0.0,
            lambda: 0.0,
            mi_half: false,
            ..LossWeights::default()
        };
        let (total, report) = compose_total(&parts, &w).unwrap();
        assert!((report.l_reg - 0.6).abs() < 1e-15);
        assert!((total.item().unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn beta_zero_lambda_zero_recovers_the_two_term_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mu = Tensor::from_vec((0..6).map(|_| rng.gen_range(-1.0..1.0)).collect(), &[6]).unwrap();
        let y = Tensor::from_vec((0..6).map(|_| rng.gen_range(-1.0..1.0)).collect(), &[6]).unwrap();
        let h = tensor_of(&rand_rows(&mut rng, 6, 4));

        let cp = l_cp(&mu, &y).unwrap();
        let mi = mi_cg_proxy(&h).unwrap();
        let parts = LossParts {
            l_cp: cp.clone(),
            l_sp: None,
            mi: Some(mi.clone()),
            l_ci: None,
        };
        let w = LossWeights {
            alpha: 0.5,
            beta: 0.0,
            lambda: 0.0,
            ..LossWeights::default()
        };
        let (total, _) = compose_total(&parts, &w).unwrap();
        let original_gib = cp.item().unwrap() + 0.5 * mi.item().unwrap();
        assert!((total.item().unwrap() - original_gib).abs() < 1e-12);
    }

    #[test]
    fn missing_weighted_component_is_a_contract_error() {
        let parts = LossParts {
            l_cp: Tensor::scalar(1.0),
            l_sp: None,
            mi: None,
            l_ci: None,
        };
        assert!(matches!(
            compose_total(&parts, &LossWeights::default()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn invalid_weights_are_rejected() {
        let w = LossWeights {
            alpha: -0.1,
            ..LossWeights::default()
        };
        assert!(w.validate().is_err());
        let w = LossWeights {
            tau: 0.0,
            ..LossWeights::default()
        };
        assert!(w.validate().is_err());
    }
}
