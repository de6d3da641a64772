//! Conditional least-squares adversarial objective with an L1 term:
//!
//! ```text
//! L(D) = E[(D(I, y) - 1)^2] + E[D(I, G(I, z))^2]
//! L(G) = E[(D(I, G(I, z)) - 1)^2] + lambda * E[|y - G(I, z)|]
//! ```
//!
//! Expectations are means over every patch logit (and every entry for L1).

use super::discriminator::Discriminator;
use crate::error::{dim_err, Result};
use crate::nn::{Real, Tensor};

fn mean_sq_to<T: Real>(logits: &Tensor<T>, target: T) -> (T, Tensor<T>) {
    let n = T::from_f64(logits.data.len() as f64);
    let two = T::from_f64(2.0);
    let value = logits.data.iter().fold(T::zero(), |a, &v| a + (v - target) * (v - target)) / n;
    (value, logits.map(|v| two * (v - target) / n))
}

/// Discriminator objective on precomputed logits, with gradients w.r.t. both
/// logit maps.
pub fn lsgan_discriminator<T: Real>(real_logits: &Tensor<T>, fake_logits: &Tensor<T>) -> (T, Tensor<T>, Tensor<T>) {
    let (lr, gr) = mean_sq_to(real_logits, T::one());
    let (lf, gf) = mean_sq_to(fake_logits, T::zero());
    (lr + lf, gr, gf)
}

/// Adversarial part of the generator objective on precomputed logits.
pub fn lsgan_generator<T: Real>(fake_logits: &Tensor<T>) -> (T, Tensor<T>) {
    mean_sq_to(fake_logits, T::one())
}

/// Mean absolute error and its gradient w.r.t. `fake`.
pub fn l1<T: Real>(target: &Tensor<T>, fake: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    if target.shape() != fake.shape() {
        return Err(dim_err!("L1 operands {:?} vs {:?}", target.shape(), fake.shape()));
    }
    let n = T::from_f64(fake.data.len() as f64);
    let value = target.data.iter().zip(&fake.data).fold(T::zero(), |a, (&y, &f)| a + (y - f).abs()) / n;
    let data = target
        .data
        .iter()
        .zip(&fake.data)
        .map(|(&y, &f)| {
            if f > y {
                T::one() / n
            } else if f < y {
                -T::one() / n
            } else {
                T::zero()
            }
        })
        .collect();
    Ok((value, Tensor::from_vec(fake.n, fake.c, fake.h, fake.w, data)))
}

/// Generator objective split into its terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorLoss<T> {
    pub adversarial: T,
    pub l1: T,
    pub total: T,
}

pub fn discriminator_loss<T: Real>(
    d: &Discriminator<T>,
    original: &Tensor<T>,
    target: &Tensor<T>,
    fake: &Tensor<T>,
) -> Result<T> {
    let (real_logits, _) = d.forward(original, target)?;
    let (fake_logits, _) = d.forward(original, fake)?;
    Ok(lsgan_discriminator(&real_logits, &fake_logits).0)
}

pub fn generator_loss<T: Real>(
    d: &Discriminator<T>,
    original: &Tensor<T>,
    target: &Tensor<T>,
    fake: &Tensor<T>,
    lambda_l1: f64,
) -> Result<GeneratorLoss<T>> {
    let (fake_logits, _) = d.forward(original, fake)?;
    let (adversarial, _) = lsgan_generator(&fake_logits);
    let (l1, _) = l1(target, fake)?;
    Ok(GeneratorLoss { adversarial, l1, total: adversarial + T::from_f64(lambda_l1) * l1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn map(values: [f64; 4]) -> Tensor<f64> {
        Tensor::from_vec(1, 1, 2, 2, values.to_vec())
    }

    #[test]
    fn discriminator_optimum_and_blind_values() {
        assert_eq!(lsgan_discriminator(&map([1.0; 4]), &map([0.0; 4])).0, 0.0);
        assert_eq!(lsgan_discriminator(&map([0.0; 4]), &map([0.0; 4])).0, 1.0);
    }

    #[test]
    fn discriminator_hand_evaluated() {
        // real: (0.5-1)^2, (1-1)^2, (2-1)^2, (-1-1)^2 -> 0.25 + 0 + 1 + 4 = 5.25 / 4
        // fake: 0.25 + 0.01 + 1 + 0 = 1.26 / 4
        let (v, gr, gf) = lsgan_discriminator(&map([0.5, 1.0, 2.0, -1.0]), &map([0.5, -0.1, 1.0, 0.0]));
        assert!((v - (5.25 + 1.26) / 4.0).abs() < 1e-12);
        assert_eq!(gr.data, vec![-0.25, 0.0, 0.5, -1.0]);
        assert!((gf.data[1] + 0.05).abs() < 1e-12);
    }

    #[test]
    fn generator_hand_evaluated() {
        // adversarial: (0.5-1)^2 + (0-1)^2 + (1-1)^2 + (2-1)^2 = 2.25 / 4
        let (adv, _) = lsgan_generator(&map([0.5, 0.0, 1.0, 2.0]));
        assert!((adv - 2.25 / 4.0).abs() < 1e-12);
        // L1: |0.2| + |0| + |0.5| + |1| = 1.7 / 4
        let (l, g) = l1(&map([1.0, 0.0, 0.5, 0.0]), &map([0.8, 0.0, 1.0, -1.0])).unwrap();
        assert!((l - 1.7 / 4.0).abs() < 1e-12);
        assert_eq!(g.data, vec![-0.25, 0.0, 0.25, -0.25]);
        let total = adv + 100.0 * l;
        assert!((total - (0.5625 + 42.5)).abs() < 1e-9);
    }

    #[test]
    fn generator_optimum_and_zero_weight() {
        let fake = map([0.3, 0.1, 0.9, 0.4]);
        let (adv, _) = lsgan_generator(&map([1.0; 4]));
        let (l, _) = l1(&fake, &fake).unwrap();
        assert_eq!(adv + 100.0 * l, 0.0);
        let (adv0, _) = lsgan_generator(&map([0.0; 4]));
        let (l0, _) = l1(&map([1.0; 4]), &fake).unwrap();
        assert_eq!(adv0 + 0.0 * l0, 1.0);
    }

    #[test]
    fn l1_shape_mismatch() {
        let a = Tensor::<f64>::zeros(1, 1, 2, 2);
        let b = Tensor::<f64>::zeros(1, 2, 2, 2);
        assert!(l1(&a, &b).is_err());
    }
}
