use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;

fn assert_close(got: &[f64], want: &[f64], tol: f64) {
    assert_eq!(got.len(), want.len(), "length mismatch");
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        assert!(
            (g - w).abs() <= tol,
            "element {i}: got {g}, want {w} (tol {tol})"
        );
    }
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()
}

#[test]
fn softmax_of_equal_logits_is_uniform() {
    let t = Tensor::from_vec(vec![0.0, 0.0], &[2]).unwrap();
    let s = t.softmax_last_dim().unwrap();
    assert_close(s.data(), &[0.5, 0.5], 0.0);
}

#[test]
fn softmax_rows_sum_to_one_and_are_strictly_inside_unit_interval() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let t = Tensor::from_vec(rand_vec(&mut rng, 5 * 7), &[5, 7]).unwrap();
    let s = t.softmax_last_dim().unwrap();
    for r in 0..5 {
        let row = &s.data()[r * 7..(r + 1) * 7];
        let sum: f64 = row.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12, "row {r} sums to {sum}");
        assert!(row.iter().all(|&v| v > 0.0 && v < 1.0));
    }
}

#[test]
fn l2_norm_squared_of_three_four_is_twenty_five() {
    let t = Tensor::from_vec(vec![3.0, 4.0], &[2]).unwrap();
    assert_eq!(t.l2_norm_squared().unwrap().item().unwrap(), 25.0);
}

#[test]
fn segment_sum_matches_definition() {
    let t = Tensor::from_vec(vec![1.0, 2.0, 3.0], &[3]).unwrap();
    let s = t.segment_sum(&[0, 0, 1], 2).unwrap();
    assert_close(s.data(), &[3.0, 3.0], 0.0);
}

#[test]
fn segment_index_out_of_range_is_an_index_error() {
    let t = Tensor::from_vec(vec![1.0, 2.0], &[2]).unwrap();
    match t.segment_sum(&[0, 2], 2) {
        Err(Error::Index(_)) => {}
        other => panic!("expected index error, got {other:?}"),
    }
}

#[test]
fn shape_mismatch_is_an_invalid_shape_error() {
    let a = Tensor::from_vec(vec![1.0, 2.0], &[2]).unwrap();
    let b = Tensor::from_vec(vec![1.0, 2.0, 3.0], &[3]).unwrap();
    assert!(matches!(a.add(&b), Err(Error::InvalidShape(_))));
    let m = Tensor::from_vec(vec![1.0; 6], &[2, 3]).unwrap();
    assert!(matches!(m.matmul(&m), Err(Error::InvalidShape(_))));
}

#[test]
fn backward_of_sum_of_squares_is_two_theta() {
    let theta = Tensor::param(vec![1.0, 2.0], &[2]).unwrap();
    let loss = theta.square().sum().unwrap();
    let grads = loss.backward(&[&theta]).unwrap();
    assert_close(grads.for_param(&theta).data(), &[2.0, 4.0], 0.0);
}

#[test]
fn backward_of_mean_is_uniform() {
    let theta = Tensor::param(vec![5.0, 7.0], &[2]).unwrap();
    let loss = theta.mean().unwrap();
    let grads = loss.backward(&[&theta]).unwrap();
    assert_close(grads.for_param(&theta).data(), &[0.5, 0.5], 0.0);
}

#[test]
fn backward_requires_scalar_loss() {
    let theta = Tensor::param(vec![1.0, 2.0], &[2]).unwrap();
    let v = theta.square();
    assert!(matches!(v.backward(&[&theta]), Err(Error::Contract(_))));
}

#[test]
fn unreached_parameters_get_zero_gradients() {
    let used = Tensor::param(vec![1.0], &[1]).unwrap();
    let unused = Tensor::param(vec![3.0, 4.0], &[2]).unwrap();
    let loss = used.square().sum().unwrap();
    let grads = loss.backward(&[&used, &unused]).unwrap();
    assert_close(grads.for_param(&unused).data(), &[0.0, 0.0], 0.0);
    assert_close(grads.for_param(&used).data(), &[2.0], 0.0);
}

#[test]
fn repeated_evaluation_is_bit_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = Tensor::param(rand_vec(&mut rng, 12), &[3, 4]).unwrap();
    let b = Tensor::param(rand_vec(&mut rng, 20), &[4, 5]).unwrap();
    let run = || {
        let h = a.matmul(&b).unwrap().relu();
        let l = h.square().mean().unwrap();
        let g = l.backward(&[&a, &b]).unwrap();
        (
            l.item().unwrap(),
            g.for_param(&a).data().to_vec(),
            g.for_param(&b).data().to_vec(),
        )
    };
    let (l1, ga1, gb1) = run();
    let (l2, ga2, gb2) = run();
    assert!(l1.to_bits() == l2.to_bits());
    assert!(ga1.iter().zip(&ga2).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert!(gb1.iter().zip(&gb2).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn fd_check_is_exact_for_quadratics() {
    let theta = Tensor::param(vec![1.0, -1.0], &[2]).unwrap();
    let err = finite_difference_check(
        |p| p[0].l2_norm_squared().map(|t| t.scalar_mul(0.5)),
        &[theta],
        1e-5,
    )
    .unwrap();
    assert!(err <= 1e-8, "quadratic fd error {err}");
}

#[test]
fn fd_check_of_logsumexp_is_tight() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let theta = Tensor::param(rand_vec(&mut rng, 6), &[6]).unwrap();
    let err = finite_difference_check(|p| p[0].logsumexp(), &[theta], 1e-5).unwrap();
    assert!(err <= 1e-6, "logsumexp fd error {err}");
}

#[test]
fn fd_check_rejects_nonpositive_step() {
    let theta = Tensor::param(vec![1.0], &[1]).unwrap();
    assert!(matches!(
        finite_difference_check(|p| p[0].sum(), &[theta], 0.0),
        Err(Error::Contract(_))
    ));
}

#[test]
fn forged_provenance_is_caught_by_fd_check() {
    // Value computed as a - b but recorded as Sub(b, a): the analytic
    // gradient has flipped signs and the checker must flag it.
    let a = Tensor::param(vec![0.8], &[1]).unwrap();
    let b = Tensor::param(vec![0.3], &[1]).unwrap();
    let err = finite_difference_check(
        |p| {
            let forged = Tensor::with_forged_op(
                vec![p[0].data()[0] - p[1].data()[0]],
                &[1],
                Op::Sub(p[1].clone(), p[0].clone()),
            );
            forged.sum()
        },
        &[a, b],
        1e-5,
    )
    .unwrap();
    assert!(err > 1e-4, "sign bug escaped the checker: {err}");
}

#[test]
fn every_primitive_matches_finite_differences() {
    // Smoke-sized version of the full suite in crate::gradcheck.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..10 {
        let a = Tensor::param(rand_vec(&mut rng, 12), &[3, 4]).unwrap();
        let b = Tensor::param(rand_vec(&mut rng, 12), &[3, 4]).unwrap();
        let m = Tensor::param(rand_vec(&mut rng, 20), &[4, 5]).unwrap();
        let s = Tensor::param(rand_vec(&mut rng, 3), &[3]).unwrap();
        let bias = Tensor::param(rand_vec(&mut rng, 4), &[4]).unwrap();
        let params = vec![a, b, m, s, bias];
        let err = finite_difference_check(
            |p| {
                let prod = p[0].matmul(&p[2])?; // [3,5]
                let gathered = prod.row_gather(&[2, 0, 1, 2])?;
                let seg = gathered.segment_mean(&[0, 1, 1, 0], 2)?;
                let mix = p[0]
                    .add(&p[1])?
                    .sub(&p[1].scalar_mul(0.5))?
                    .mul(&p[1].sigmoid())?
                    .scale_rows(&p[3])?
                    .add_bias(&p[4])?;
                let sm = mix.softmax_last_dim()?.slice_column(1)?;
                let cos = seg.reshape(&[10])?.cosine_similarity(&Tensor::concat_last_dim(&[
                    &sm,
                    &sm,
                    &p[3],
                    &p[3].exp().mean()?,
                ])?)?;
                let pieces = Tensor::concat_last_dim(&[
                    &cos,
                    &mix.l2_norm_squared()?.scalar_mul(0.01),
                    &sm.square().mean()?,
                    &p[1].relu().sum()?.scalar_mul(0.1),
                    &p[0].add_scalar(3.0).log().sum()?.scalar_mul(0.05),
                ])?;
                pieces.logsumexp()
            },
            &params,
            1e-5,
        )
        .unwrap();
        assert!(err <= 1e-4, "trial {trial}: composed fd error {err}");
    }
}
