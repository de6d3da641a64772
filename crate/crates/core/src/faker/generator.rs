//! U-Net generator: stride-2 encoder, transposed-conv decoder, and a skip
//! connection at every level. Dropout on the innermost decoder levels plays
//! the role of the noise input.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{cfg_err, dim_err, Result};
use crate::nn::{
    cat_channels, dropout, instance_norm, instance_norm_backward, leaky_relu, relu, relu_backward, sigmoid,
    split_channels, Conv2d, ConvCache, ConvTranspose2d, ConvTransposeCache, NormCache, Real, Tensor,
};

pub const LEAK: f64 = 0.2;
pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    /// Squash to (0, 1); used for bit-planes and raw pixels.
    Sigmoid,
    /// Unbounded; used for transform coefficients.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub depth: usize,
    pub base_width: usize,
    pub max_width: usize,
    /// How many decoder levels, counted from the innermost, apply dropout.
    pub dropout_levels: usize,
    pub dropout_p: f64,
    pub output: OutputActivation,
    pub norm: bool,
}

impl GeneratorSpec {
    /// Feature width of encoder level `level` (0 = outermost).
    pub fn width(&self, level: usize) -> usize {
        (self.base_width << level).min(self.max_width)
    }

    pub fn has_dropout(&self, level: usize) -> bool {
        level >= 1 && level + self.dropout_levels >= self.depth
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 {
            return Err(cfg_err!("generator depth must be at least 2"));
        }
        if self.in_channels == 0 || self.out_channels == 0 || self.base_width == 0 || self.max_width == 0 {
            return Err(cfg_err!("generator widths must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(cfg_err!("dropout probability must be in [0, 1)"));
        }
        Ok(())
    }

    pub fn check_input(&self, x: &Tensor<impl Real>) -> Result<()> {
        let m = 1 << self.depth;
        if x.c != self.in_channels {
            return Err(dim_err!("generator expects {} channels, got {}", self.in_channels, x.c));
        }
        if x.h % m != 0 || x.w % m != 0 || x.h == 0 || x.w == 0 {
            return Err(dim_err!("generator input {}x{} not divisible by {m}", x.h, x.w));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator<T> {
    spec: GeneratorSpec,
    down: Vec<Conv2d<T>>,
    up: Vec<ConvTranspose2d<T>>,
}

/// Activations recorded by [`Generator::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct GenTape<T> {
    down: Vec<ConvCache<T>>,
    /// `down_act[i]` = leaky-relu output feeding encoder level `i` (i >= 1).
    down_act: Vec<Option<Tensor<T>>>,
    down_norm: Vec<Option<NormCache<T>>>,
    up: Vec<ConvTransposeCache<T>>,
    up_act: Vec<Tensor<T>>,
    up_norm: Vec<Option<NormCache<T>>>,
    up_mask: Vec<Option<Vec<T>>>,
    out: Tensor<T>,
}

impl<T: Real> Generator<T> {
    pub fn new(spec: GeneratorSpec, rng: &mut impl Rng) -> Result<Self> {
        spec.validate()?;
        let d = spec.depth;
        let down = (0..d)
            .map(|i| {
                let cin = if i == 0 { spec.in_channels } else { spec.width(i - 1) };
                Conv2d::new(cin, spec.width(i), 4, 2, 1, INIT_STD, rng)
            })
            .collect();
        let up = (0..d)
            .map(|i| {
                let cin = if i == d - 1 { spec.width(i) } else { 2 * spec.width(i) };
                let cout = if i == 0 { spec.out_channels } else { spec.width(i - 1) };
                ConvTranspose2d::new(cin, cout, 4, 2, 1, INIT_STD, rng)
            })
            .collect();
        Ok(Self { spec, down, up })
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    /// Parameter buffers: encoder (weight, bias) per level, then decoder.
    pub fn params(&self) -> Vec<&Vec<T>> {
        let down = self.down.iter().flat_map(|l| [&l.weight, &l.bias]);
        let up = self.up.iter().flat_map(|l| [&l.weight, &l.bias]);
        down.chain(up).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<T>> {
        let down = self.down.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias]);
        let up = self.up.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias]);
        down.chain(up).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn zero_grads(&self) -> Vec<Vec<T>> {
        self.params().iter().map(|p| alloc::vec![T::zero(); p.len()]).collect()
    }

    /// Final decoder layer, exposed so tests can pin the output bias.
    pub fn output_layer_mut(&mut self) -> &mut ConvTranspose2d<T> {
        &mut self.up[0]
    }

    fn norm(&self, x: Tensor<T>) -> (Tensor<T>, Option<NormCache<T>>) {
        if self.spec.norm {
            let (y, c) = instance_norm(&x);
            (y, Some(c))
        } else {
            (x, None)
        }
    }

    /// Runs the generator. Dropout is applied only when `noise` is given.
    pub fn forward<R: Rng>(&self, x: &Tensor<T>, mut noise: Option<&mut R>) -> Result<(Tensor<T>, GenTape<T>)> {
        self.spec.check_input(x)?;
        let d = self.spec.depth;
        let leak = T::from_f64(LEAK);

        let mut down_caches = Vec::with_capacity(d);
        let mut down_act = Vec::with_capacity(d);
        let mut down_norm = Vec::with_capacity(d);
        let mut enc: Vec<Tensor<T>> = Vec::with_capacity(d);
        let (e0, c0) = self.down[0].forward(x);
        enc.push(e0);
        down_caches.push(c0);
        down_act.push(None);
        down_norm.push(None);
        for i in 1..d {
            let a = leaky_relu(&enc[i - 1], leak);
            let (c, cache) = self.down[i].forward(&a);
            let (e, nc) = self.norm(c);
            enc.push(e);
            down_caches.push(cache);
            down_act.push(Some(a));
            down_norm.push(nc);
        }

        let mut up_caches: Vec<Option<ConvTransposeCache<T>>> = (0..d).map(|_| None).collect();
        let mut up_act: Vec<Option<Tensor<T>>> = (0..d).map(|_| None).collect();
        let mut up_norm: Vec<Option<NormCache<T>>> = (0..d).map(|_| None).collect();
        let mut up_mask: Vec<Option<Vec<T>>> = (0..d).map(|_| None).collect();

        let mut inner: Option<Tensor<T>> = None;
        for i in (0..d).rev() {
            let joined = match inner.take() {
                None => enc[i].clone(),
                Some(t) => cat_channels(&enc[i], &t),
            };
            let h = relu(&joined);
            let (t, cache) = self.up[i].forward(&h);
            up_caches[i] = Some(cache);
            up_act[i] = Some(h);
            if i == 0 {
                inner = Some(t);
                break;
            }
            let (mut t, nc) = self.norm(t);
            up_norm[i] = nc;
            if self.spec.has_dropout(i) {
                if let Some(rng) = noise.as_deref_mut() {
                    let (dropped, mask) = dropout(&t, self.spec.dropout_p, rng);
                    t = dropped;
                    up_mask[i] = Some(mask);
                }
            }
            inner = Some(t);
        }
        let raw = inner.expect("depth >= 2");
        let out = match self.spec.output {
            OutputActivation::Sigmoid => sigmoid(&raw),
            OutputActivation::Linear => raw,
        };
        let tape = GenTape {
            down: down_caches,
            down_act,
            down_norm,
            up: up_caches.into_iter().map(|c| c.expect("filled")).collect(),
            up_act: up_act.into_iter().map(|c| c.expect("filled")).collect(),
            up_norm,
            up_mask,
            out: out.clone(),
        };
        Ok((out, tape))
    }

    /// Accumulates parameter gradients for `grad_out` (gradient w.r.t. the
    /// generator output) into `grads`, laid out like [`params`](Self::params).
    pub fn backward(&self, tape: &GenTape<T>, grad_out: &Tensor<T>, grads: &mut [Vec<T>]) {
        let d = self.spec.depth;
        let leak = T::from_f64(LEAK);
        let mut g = match self.spec.output {
            OutputActivation::Sigmoid => {
                let data = grad_out.data.iter().zip(&tape.out.data).map(|(&g, &y)| g * y * (T::one() - y)).collect();
                Tensor::from_vec(grad_out.n, grad_out.c, grad_out.h, grad_out.w, data)
            }
            OutputActivation::Linear => grad_out.clone(),
        };

        let mut g_enc: Vec<Option<Tensor<T>>> = (0..d).map(|_| None).collect();
        for i in 0..d {
            if i > 0 {
                if let Some(mask) = &tape.up_mask[i] {
                    g.data.iter_mut().zip(mask).for_each(|(v, &m)| *v *= m);
                }
                if let Some(nc) = &tape.up_norm[i] {
                    g = instance_norm_backward(nc, &g);
                }
            }
            let (gw, gb) = split_pair(grads, 2 * (d + i));
            let gh = self.up[i].backward(&tape.up[i], &g, Some((gw, gb)), true).expect("input grad");
            let gs = relu_backward(&tape.up_act[i], &gh, T::zero());
            if i == d - 1 {
                add_into(&mut g_enc[i], gs);
            } else {
                let (ge, gt) = split_channels(&gs, self.spec.width(i));
                add_into(&mut g_enc[i], ge);
                g = gt;
            }
        }

        for i in (0..d).rev() {
            let mut ge = g_enc[i].take().expect("every level receives a gradient");
            if let Some(nc) = &tape.down_norm[i] {
                ge = instance_norm_backward(nc, &ge);
            }
            let (gw, gb) = split_pair(grads, 2 * i);
            let ga = self.down[i].backward(&tape.down[i], &ge, Some((gw, gb)), i > 0);
            if let (Some(ga), Some(act)) = (ga, &tape.down_act[i]) {
                add_into(&mut g_enc[i - 1], relu_backward(act, &ga, leak));
            }
        }
    }
}

fn add_into<T: Real>(slot: &mut Option<Tensor<T>>, g: Tensor<T>) {
    match slot {
        Some(acc) => acc.data.iter_mut().zip(&g.data).for_each(|(a, &b)| *a += b),
        None => *slot = Some(g),
    }
}

/// Mutable (weight, bias) gradient buffers starting at `index`.
pub(crate) fn split_pair<T>(grads: &mut [Vec<T>], index: usize) -> (&mut [T], &mut [T]) {
    let (w, rest) = grads[index..].split_at_mut(1);
    (&mut w[0], &mut rest[0])
}
