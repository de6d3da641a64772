use alloc::vec;
use alloc::vec::Vec;

use super::Real;

/// Adaptive-moment optimizer with bias correction. Moment buffers are laid
/// out parallel to the parameter list they were created for.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(sizes: &[usize], lr: f64, beta1: f64, beta2: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps: 1e-8,
            t: 0,
            m: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    pub fn step(&mut self, params: Vec<&mut Vec<T>>, grads: &[Vec<T>]) {
        assert_eq!(params.len(), grads.len(), "parameter/gradient count");
        self.t += 1;
        let (b1, b2) = (T::from_f64(self.beta1), T::from_f64(self.beta2));
        let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
        let t = self.t as i32;
        let step = T::from_f64(self.lr / (1.0 - libm::pow(self.beta1, t as f64)));
        let bias2 = T::from_f64(1.0 - libm::pow(self.beta2, t as f64));
        let eps = T::from_f64(self.eps);
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + one_b1 * g;
                *v = b2 * *v + one_b2 * g * g;
                *p -= step * *m / ((*v / bias2).sqrt() + eps);
            }
        }
    }
}
