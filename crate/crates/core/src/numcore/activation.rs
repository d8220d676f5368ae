use crate::error::{Error, Result};
use crate::numcore::Tensor;

pub fn relu_forward(input: &Tensor) -> Tensor {
    input.map(|v| v.max(0.0))
}

pub fn relu_forward_inplace(t: &mut Tensor) {
    for v in t.data_mut() {
        *v = v.max(0.0);
    }
}

/// Passes `grad_out` where `input > 0`. The subgradient at exactly zero is 0.
pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    if input.shape() != grad_out.shape() {
        return Err(Error::shape(
            "relu_backward",
            input.shape(),
            grad_out.shape(),
        ));
    }
    let mut out = grad_out.clone();
    relu_mask_inplace(input, &mut out);
    Ok(out)
}

pub(crate) fn relu_mask_inplace(input: &Tensor, grad: &mut Tensor) {
    for (g, &x) in grad.data_mut().iter_mut().zip(input.data()) {
        if x <= 0.0 {
            *g = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn clamps_negatives() {
        let t = Tensor::from_vec([1, 1, 1, 3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu_forward(&t).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn gradient_at_zero_is_zero() {
        let t = Tensor::from_vec([1, 1, 1, 3], vec![-1.0, 0.0, 2.0]).unwrap();
        let g = Tensor::filled([1, 1, 1, 3], 5.0);
        assert_eq!(relu_backward(&t, &g).unwrap().data(), &[0.0, 0.0, 5.0]);
    }

    #[test]
    fn matches_finite_differences_away_from_kink() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Tensor::from_fn([1, 2, 4, 4], |_, _, _, _| rng.random_range(-1.0..1.0));
        let go = Tensor::from_fn([1, 2, 4, 4], |_, _, _, _| rng.random_range(-1.0..1.0));
        let analytic = relu_backward(&x, &go).unwrap();
        let f = |t: &Tensor| -> f64 {
            relu_forward(t)
                .data()
                .iter()
                .zip(go.data())
                .map(|(a, b)| a * b)
                .sum()
        };
        let eps = 1e-5;
        for i in 0..x.len() {
            if x.data()[i].abs() < 1e-3 {
                continue;
            }
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp.data_mut()[i] += eps;
            xm.data_mut()[i] -= eps;
            let num = (f(&xp) - f(&xm)) / (2.0 * eps);
            let a = analytic.data()[i];
            assert!((a - num).abs() / a.abs().max(num.abs()).max(1e-6) <= 1e-6);
        }
    }
}
