//! Patch discriminator: scores overlapping patches of the (condition,
//! candidate) channel stack, producing a map of logits.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::generator::{split_pair, INIT_STD, LEAK};
use crate::error::{cfg_err, dim_err, Result};
use crate::nn::{
    cat_channels, instance_norm, instance_norm_backward, leaky_relu, relu_backward, split_channels, Conv2d, ConvCache,
    NormCache, Real, Tensor,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorSpec {
    /// Channels of one representation; the network sees twice as many.
    pub in_channels: usize,
    pub stages: usize,
    pub base_width: usize,
    pub max_width: usize,
    pub norm: bool,
}

impl DiscriminatorSpec {
    pub fn width(&self, stage: usize) -> usize {
        (self.base_width << stage).min(self.max_width)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages == 0 || self.in_channels == 0 || self.base_width == 0 || self.max_width == 0 {
            return Err(cfg_err!("discriminator sizes must be positive"));
        }
        Ok(())
    }

    /// Side length of the logit map for an input side of `len`.
    pub fn logit_len(&self, len: usize) -> usize {
        let reduced = (0..self.stages).fold(len, |l, _| l / 2);
        (reduced + 2).saturating_sub(3)
    }

    /// Inclusive range of input rows (or columns) that can influence logit
    /// row `index`, clipped to the input.
    pub fn receptive_field(&self, index: usize, len: usize) -> (usize, usize) {
        // final conv: k4 s1 p1, then stages of k4 s2 p1, walked back to the input
        let (mut lo, mut hi) = (index as isize - 1, index as isize + 2);
        for _ in 0..self.stages {
            lo = 2 * lo - 1;
            hi = 2 * hi + 2;
        }
        (lo.max(0) as usize, (hi.min(len as isize - 1)) as usize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator<T> {
    spec: DiscriminatorSpec,
    convs: Vec<Conv2d<T>>,
    head: Conv2d<T>,
}

#[derive(Debug, Clone)]
pub struct DiscTape<T> {
    convs: Vec<ConvCache<T>>,
    acts: Vec<Tensor<T>>,
    norms: Vec<Option<NormCache<T>>>,
    head: ConvCache<T>,
    cond_channels: usize,
}

impl<T: Real> Discriminator<T> {
    pub fn new(spec: DiscriminatorSpec, rng: &mut impl Rng) -> Result<Self> {
        spec.validate()?;
        let convs = (0..spec.stages)
            .map(|i| {
                let cin = if i == 0 { 2 * spec.in_channels } else { spec.width(i - 1) };
                Conv2d::new(cin, spec.width(i), 4, 2, 1, INIT_STD, rng)
            })
            .collect();
        let head = Conv2d::new(spec.width(spec.stages - 1), 1, 4, 1, 1, INIT_STD, rng);
        Ok(Self { spec, convs, head })
    }

    pub fn spec(&self) -> &DiscriminatorSpec {
        &self.spec
    }

    pub fn params(&self) -> Vec<&Vec<T>> {
        self.convs.iter().chain(core::iter::once(&self.head)).flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<T>> {
        self.convs.iter_mut().chain(core::iter::once(&mut self.head)).flat_map(|l| [&mut l.weight, &mut l.bias]).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn zero_grads(&self) -> Vec<Vec<T>> {
        self.params().iter().map(|p| alloc::vec![T::zero(); p.len()]).collect()
    }

    pub fn forward(&self, cond: &Tensor<T>, cand: &Tensor<T>) -> Result<(Tensor<T>, DiscTape<T>)> {
        if cond.shape() != cand.shape() || cond.c != self.spec.in_channels {
            return Err(dim_err!(
                "discriminator inputs {:?} and {:?}, expected {} channels each",
                cond.shape(),
                cand.shape(),
                self.spec.in_channels
            ));
        }
        if self.spec.logit_len(cond.h) == 0 || self.spec.logit_len(cond.w) == 0 {
            return Err(dim_err!("input {}x{} too small for {} stages", cond.h, cond.w, self.spec.stages));
        }
        let leak = T::from_f64(LEAK);
        let mut x = cat_channels(cond, cand);
        let mut convs = Vec::with_capacity(self.spec.stages);
        let mut acts = Vec::with_capacity(self.spec.stages);
        let mut norms = Vec::with_capacity(self.spec.stages);
        for (i, conv) in self.convs.iter().enumerate() {
            let (y, cache) = conv.forward(&x);
            let (y, nc) = if i > 0 && self.spec.norm {
                let (y, nc) = instance_norm(&y);
                (y, Some(nc))
            } else {
                (y, None)
            };
            x = leaky_relu(&y, leak);
            convs.push(cache);
            norms.push(nc);
            acts.push(x.clone());
        }
        let (logits, head) = self.head.forward(&x);
        Ok((logits, DiscTape { convs, acts, norms, head, cond_channels: cond.c }))
    }

    /// Back-propagates `grad_logits`. Parameter gradients are accumulated into
    /// `grads` when given; the gradient w.r.t. the candidate input is
    /// returned when `need_input` is set.
    pub fn backward(
        &self,
        tape: &DiscTape<T>,
        grad_logits: &Tensor<T>,
        mut grads: Option<&mut [Vec<T>]>,
        need_input: bool,
    ) -> Option<Tensor<T>> {
        let leak = T::from_f64(LEAK);
        let s = self.spec.stages;
        let head_grads = grads.as_deref_mut().map(|g| split_pair(g, 2 * s));
        let mut g = self.head.backward(&tape.head, grad_logits, head_grads, true).expect("input grad");
        for i in (0..s).rev() {
            g = relu_backward(&tape.acts[i], &g, leak);
            if let Some(nc) = &tape.norms[i] {
                g = instance_norm_backward(nc, &g);
            }
            let pg = grads.as_deref_mut().map(|gr| split_pair(gr, 2 * i));
            let want_input = i > 0 || need_input;
            g = self.convs[i].backward(&tape.convs[i], &g, pg, want_input)?;
        }
        Some(split_channels(&g, tape.cond_channels).1)
    }
}
