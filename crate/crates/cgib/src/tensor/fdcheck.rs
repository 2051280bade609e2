//! Central finite-difference verification of analytic gradients.

use super::Tensor;
use crate::error::{Error, Result};

/// Compare the analytic gradient of `f` against central finite differences
/// over every coordinate of every parameter. Returns the maximum relative
/// error, with denominator `max(|analytic|, |numeric|, 1e-8)`.
pub fn finite_difference_check<F>(f: F, params: &[Tensor], step: f64) -> Result<f64>
where
    F: Fn(&[Tensor]) -> Result<Tensor>,
{
    if step <= 0.0 {
        return Err(Error::Contract("finite_difference_check: step must be > 0".into()));
    }
    let loss = f(params)?;
    let base = loss.item()?;
    if !base.is_finite() {
        return Err(Error::Numeric(format!("objective is non-finite: {base}")));
    }
    let refs: Vec<&Tensor> = params.iter().collect();
    let grads = loss.backward(&refs)?;

    let mut max_rel: f64 = 0.0;
    for (pi, p) in params.iter().enumerate() {
        let analytic = grads.for_param(p);
        for ci in 0..p.len() {
            let eval = |delta: f64| -> Result<f64> {
                let mut data = p.data().to_vec();
                data[ci] += delta;
                let mut perturbed: Vec<Tensor> = params.to_vec();
                perturbed[pi] = Tensor::param(data, p.shape())?;
                let v = f(&perturbed)?.item()?;
                if !v.is_finite() {
                    return Err(Error::Numeric(format!("objective is non-finite: {v}")));
                }
                Ok(v)
            };
            let numeric = (eval(step)? - eval(-step)?) / (2.0 * step);
            let a = analytic.data()[ci];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            max_rel = max_rel.max(rel);
        }
    }
    Ok(max_rel)
}
