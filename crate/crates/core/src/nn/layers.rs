use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{col2im, conv_out_len, gemm_nn, gemm_nt, gemm_tn, im2col, Real, Tensor};

fn gaussian<T: Real>(len: usize, std: f64, rng: &mut impl Rng) -> Vec<T> {
    let normal = Normal::new(0.0, std).expect("finite std");
    (0..len).map(|_| T::from_f64(normal.sample(rng))).collect()
}

fn add_bias<T: Real>(out: &mut [T], bias: &[T], plane: usize) {
    for (chunk, &b) in out.chunks_exact_mut(plane).zip(bias) {
        chunk.iter_mut().for_each(|v| *v += b);
    }
}

fn accumulate_bias_grad<T: Real>(gb: &mut [T], gy: &[T], plane: usize) {
    for (g, chunk) in gb.iter_mut().zip(gy.chunks_exact(plane)) {
        *g += chunk.iter().fold(T::zero(), |acc, &v| acc + v);
    }
}

/// Square-kernel convolution. Weights are `cout × (cin·k·k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct ConvCache<T> {
    cols: Vec<T>,
    n: usize,
    h: usize,
    w: usize,
}

impl<T: Real> Conv2d<T> {
    pub fn new(cin: usize, cout: usize, kernel: usize, stride: usize, pad: usize, init_std: f64, rng: &mut impl Rng) -> Self {
        Self {
            cin,
            cout,
            kernel,
            stride,
            pad,
            weight: gaussian(cout * cin * kernel * kernel, init_std, rng),
            bias: vec![T::zero(); cout],
        }
    }

    fn patch_len(&self) -> usize {
        self.cin * self.kernel * self.kernel
    }

    pub fn forward(&self, x: &Tensor<T>) -> (Tensor<T>, ConvCache<T>) {
        assert_eq!(x.c, self.cin, "conv input channels");
        let (ho, wo) = (conv_out_len(x.h, self.kernel, self.stride, self.pad), conv_out_len(x.w, self.kernel, self.stride, self.pad));
        let (kk, hw) = (self.patch_len(), ho * wo);
        let mut cols = vec![T::zero(); x.n * kk * hw];
        let mut y = Tensor::zeros(x.n, self.cout, ho, wo);
        for i in 0..x.n {
            let cs = &mut cols[i * kk * hw..(i + 1) * kk * hw];
            im2col(x.sample(i), x.c, x.h, x.w, self.kernel, self.stride, self.pad, cs);
            let ys = y.sample_mut(i);
            gemm_nn(self.cout, kk, hw, &self.weight, cs, ys, false);
            add_bias(ys, &self.bias, hw);
        }
        (y, ConvCache { cols, n: x.n, h: x.h, w: x.w })
    }

    /// Accumulates parameter gradients into `param_grads` (weight, bias) when
    /// given, and returns the input gradient when `need_input` is set.
    pub fn backward(
        &self,
        cache: &ConvCache<T>,
        gy: &Tensor<T>,
        mut param_grads: Option<(&mut [T], &mut [T])>,
        need_input: bool,
    ) -> Option<Tensor<T>> {
        let (kk, hw) = (self.patch_len(), gy.plane_len());
        let mut gx = need_input.then(|| Tensor::zeros(cache.n, self.cin, cache.h, cache.w));
        let mut dcols = vec![T::zero(); kk * hw];
        for i in 0..cache.n {
            let gys = gy.sample(i);
            let cs = &cache.cols[i * kk * hw..(i + 1) * kk * hw];
            if let Some((gw, gb)) = param_grads.as_mut() {
                gemm_nt(self.cout, hw, kk, gys, cs, gw, true);
                accumulate_bias_grad(gb, gys, hw);
            }
            if let Some(gx) = gx.as_mut() {
                gemm_tn(kk, self.cout, hw, &self.weight, gys, &mut dcols, false);
                col2im(&dcols, self.cin, cache.h, cache.w, self.kernel, self.stride, self.pad, gx.sample_mut(i));
            }
        }
        gx
    }
}

/// Transposed convolution (the adjoint of [`Conv2d`] with the same geometry).
/// Weights are `cin × (cout·k·k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvTranspose2d<T> {
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct ConvTransposeCache<T> {
    x: Tensor<T>,
}

impl<T: Real> ConvTranspose2d<T> {
    pub fn new(cin: usize, cout: usize, kernel: usize, stride: usize, pad: usize, init_std: f64, rng: &mut impl Rng) -> Self {
        Self {
            cin,
            cout,
            kernel,
            stride,
            pad,
            weight: gaussian(cin * cout * kernel * kernel, init_std, rng),
            bias: vec![T::zero(); cout],
        }
    }

    pub fn out_len(&self, len: usize) -> usize {
        (len - 1) * self.stride + self.kernel - 2 * self.pad
    }

    pub fn forward(&self, x: &Tensor<T>) -> (Tensor<T>, ConvTransposeCache<T>) {
        assert_eq!(x.c, self.cin, "transposed conv input channels");
        let (ho, wo) = (self.out_len(x.h), self.out_len(x.w));
        let (kk, hw) = (self.cout * self.kernel * self.kernel, x.plane_len());
        let mut cols = vec![T::zero(); kk * hw];
        let mut y = Tensor::zeros(x.n, self.cout, ho, wo);
        for i in 0..x.n {
            gemm_tn(kk, self.cin, hw, &self.weight, x.sample(i), &mut cols, false);
            let ys = y.sample_mut(i);
            col2im(&cols, self.cout, ho, wo, self.kernel, self.stride, self.pad, ys);
            add_bias(ys, &self.bias, ho * wo);
        }
        (y, ConvTransposeCache { x: x.clone() })
    }

    pub fn backward(
        &self,
        cache: &ConvTransposeCache<T>,
        gy: &Tensor<T>,
        mut param_grads: Option<(&mut [T], &mut [T])>,
        need_input: bool,
    ) -> Option<Tensor<T>> {
        let x = &cache.x;
        let (kk, hw) = (self.cout * self.kernel * self.kernel, x.plane_len());
        let mut gx = need_input.then(|| Tensor::zeros(x.n, self.cin, x.h, x.w));
        let mut dcols = vec![T::zero(); kk * hw];
        for i in 0..x.n {
            let gys = gy.sample(i);
            im2col(gys, self.cout, gy.h, gy.w, self.kernel, self.stride, self.pad, &mut dcols);
            if let Some((gw, gb)) = param_grads.as_mut() {
                gemm_nt(self.cin, hw, kk, x.sample(i), &dcols, gw, true);
                accumulate_bias_grad(gb, gys, gy.plane_len());
            }
            if let Some(gx) = gx.as_mut() {
                gemm_nn(self.cin, kk, hw, &self.weight, &dcols, gx.sample_mut(i), false);
            }
        }
        gx
    }
}

pub const NORM_EPS: f64 = 1e-5;

/// Normalized output and per-(sample, channel) inverse standard deviations.
#[derive(Debug, Clone)]
pub struct NormCache<T> {
    y: Tensor<T>,
    inv_std: Vec<T>,
}

/// Per-sample, per-channel normalization to zero mean and unit variance.
pub fn instance_norm<T: Real>(x: &Tensor<T>) -> (Tensor<T>, NormCache<T>) {
    let plane = x.plane_len();
    let count = T::from_f64(plane as f64);
    let eps = T::from_f64(NORM_EPS);
    let mut y = x.clone();
    let mut inv_std = Vec::with_capacity(x.n * x.c);
    for chunk in y.data.chunks_exact_mut(plane) {
        let mean = chunk.iter().fold(T::zero(), |a, &v| a + v) / count;
        let var = chunk.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean)) / count;
        let inv = T::one() / (var + eps).sqrt();
        chunk.iter_mut().for_each(|v| *v = (*v - mean) * inv);
        inv_std.push(inv);
    }
    (y.clone(), NormCache { y, inv_std })
}

pub fn instance_norm_backward<T: Real>(cache: &NormCache<T>, gy: &Tensor<T>) -> Tensor<T> {
    let plane = gy.plane_len();
    let count = T::from_f64(plane as f64);
    let mut gx = gy.clone();
    for ((g, y), &inv) in gx.data.chunks_exact_mut(plane).zip(cache.y.data.chunks_exact(plane)).zip(&cache.inv_std) {
        let mean_g = g.iter().fold(T::zero(), |a, &v| a + v) / count;
        let mean_gy = g.iter().zip(y).fold(T::zero(), |a, (&gv, &yv)| a + gv * yv) / count;
        for (gv, &yv) in g.iter_mut().zip(y) {
            *gv = inv * (*gv - mean_g - yv * mean_gy);
        }
    }
    gx
}

pub fn leaky_relu<T: Real>(x: &Tensor<T>, slope: T) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { v * slope })
}

/// Gradient of [`leaky_relu`] (also of [`relu`] with `slope = 0`) given its output.
pub fn relu_backward<T: Real>(y: &Tensor<T>, gy: &Tensor<T>, slope: T) -> Tensor<T> {
    let data = y.data.iter().zip(&gy.data).map(|(&yv, &g)| if yv > T::zero() { g } else { g * slope }).collect();
    Tensor::from_vec(gy.n, gy.c, gy.h, gy.w, data)
}

pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

pub fn sigmoid<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| T::one() / (T::one() + (-v).exp()))
}

/// Inverted dropout: zeroes each entry with probability `p` and scales the
/// survivors by `1 / (1 - p)`. Returns the output and the multiplier mask.
pub fn dropout<T: Real>(x: &Tensor<T>, p: f64, rng: &mut impl Rng) -> (Tensor<T>, Vec<T>) {
    let keep = T::from_f64(1.0 / (1.0 - p));
    let mask: Vec<T> = (0..x.data.len()).map(|_| if rng.random::<f64>() < p { T::zero() } else { keep }).collect();
    let data = x.data.iter().zip(&mask).map(|(&v, &m)| v * m).collect();
    (Tensor::from_vec(x.n, x.c, x.h, x.w, data), mask)
}

pub fn cat_channels<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    assert_eq!((a.n, a.h, a.w), (b.n, b.h, b.w), "concat spatial shape");
    let mut data = Vec::with_capacity(a.data.len() + b.data.len());
    for i in 0..a.n {
        data.extend_from_slice(a.sample(i));
        data.extend_from_slice(b.sample(i));
    }
    Tensor::from_vec(a.n, a.c + b.c, a.h, a.w, data)
}

/// Splits a gradient of [`cat_channels`] output back into its two parts.
pub fn split_channels<T: Real>(g: &Tensor<T>, first: usize) -> (Tensor<T>, Tensor<T>) {
    let (la, lb) = (first * g.plane_len(), (g.c - first) * g.plane_len());
    let mut a = Vec::with_capacity(g.n * la);
    let mut b = Vec::with_capacity(g.n * lb);
    for i in 0..g.n {
        let s = g.sample(i);
        a.extend_from_slice(&s[..la]);
        b.extend_from_slice(&s[la..]);
    }
    (Tensor::from_vec(g.n, first, g.h, g.w, a), Tensor::from_vec(g.n, g.c - first, g.h, g.w, b))
}
