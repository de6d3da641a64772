//! A minimal NCHW tensor engine with hand-written backward passes: exactly
//! the layers a U-Net generator and a patch discriminator need.
//!
//! Everything is generic over [`Real`] so gradient checks can run in `f64`
//! while training runs in `f32`. Matrix products go through `matrixmultiply`;
//! all reductions run in a fixed order, so results are bit-reproducible.

mod adam;
mod layers;

pub use adam::Adam;
pub use layers::{
    cat_channels, dropout, instance_norm, instance_norm_backward, leaky_relu, relu, relu_backward,
    sigmoid, split_channels, Conv2d, ConvCache, ConvTranspose2d, ConvTransposeCache, NormCache,
};

use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;
use core::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

pub trait Real:
    num_traits::Float + Default + AddAssign + SubAssign + MulAssign + DivAssign + Debug + Send + Sync + 'static
{
    /// `C = A·B + beta·C` over strided row/column layouts.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        a_strides: (isize, isize),
        b: &[Self],
        b_strides: (isize, isize),
        beta: Self,
        c: &mut [Self],
        c_strides: (isize, isize),
    );

    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

macro_rules! impl_real {
    ($t:ty, $gemm:path) => {
        impl Real for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                a: &[Self],
                (rsa, csa): (isize, isize),
                b: &[Self],
                (rsb, csb): (isize, isize),
                beta: Self,
                c: &mut [Self],
                (rsc, csc): (isize, isize),
            ) {
                let span = |rows: usize, cols: usize, rs: isize, cs: isize| {
                    if rows == 0 || cols == 0 {
                        0
                    } else {
                        (rows as isize - 1) * rs + (cols as isize - 1) * cs + 1
                    }
                };
                assert!(a.len() as isize >= span(m, k, rsa, csa));
                assert!(b.len() as isize >= span(k, n, rsb, csb));
                assert!(c.len() as isize >= span(m, n, rsc, csc));
                // SAFETY: the asserts above keep every strided access inside the slices.
                unsafe {
                    $gemm(m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), rsc, csc);
                }
            }

            #[inline]
            fn from_f64(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_real!(f32, matrixmultiply::sgemm);
impl_real!(f64, matrixmultiply::dgemm);

#[inline]
fn beta<T: Real>(accumulate: bool) -> T {
    if accumulate {
        T::one()
    } else {
        T::zero()
    }
}

/// `C[m×n] (+)= A[m×k] · B[k×n]`
pub fn gemm_nn<T: Real>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T], accumulate: bool) {
    T::gemm(m, k, n, a, (k as isize, 1), b, (n as isize, 1), beta(accumulate), c, (n as isize, 1));
}

/// `C[m×n] (+)= A[m×k] · B[n×k]ᵀ`
pub fn gemm_nt<T: Real>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T], accumulate: bool) {
    T::gemm(m, k, n, a, (k as isize, 1), b, (1, k as isize), beta(accumulate), c, (n as isize, 1));
}

/// `C[m×n] (+)= A[k×m]ᵀ · B[k×n]`
pub fn gemm_tn<T: Real>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T], accumulate: bool) {
    T::gemm(m, k, n, a, (1, m as isize), b, (n as isize, 1), beta(accumulate), c, (n as isize, 1));
}

/// Dense NCHW tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self { n, c, h, w, data: vec![T::zero(); n * c * h * w] }
    }

    pub fn from_vec(n: usize, c: usize, h: usize, w: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), n * c * h * w, "tensor buffer size");
        Self { n, c, h, w, data }
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }

    pub fn plane_len(&self) -> usize {
        self.h * self.w
    }

    pub fn sample_len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn sample(&self, i: usize) -> &[T] {
        let len = self.sample_len();
        &self.data[i * len..(i + 1) * len]
    }

    pub fn sample_mut(&mut self, i: usize) -> &mut [T] {
        let len = self.sample_len();
        &mut self.data[i * len..(i + 1) * len]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { n: self.n, c: self.c, h: self.h, w: self.w, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn mean(&self) -> T {
        let sum = self.data.iter().fold(T::zero(), |acc, &v| acc + v);
        sum / T::from_f64(self.data.len() as f64)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor { n: self.n, c: self.c, h: self.h, w: self.w, data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect() }
    }
}

/// Output side length of a convolution.
pub fn conv_out_len(len: usize, kernel: usize, stride: usize, pad: usize) -> usize {
    (len + 2 * pad - kernel) / stride + 1
}

/// Unfolds one `C×H×W` sample into a `(C·k·k) × (Ho·Wo)` patch matrix.
#[allow(clippy::too_many_arguments)]
pub fn im2col<T: Real>(
    x: &[T],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    cols: &mut [T],
) {
    let (ho, wo) = (conv_out_len(h, k, stride, pad), conv_out_len(w, k, stride, pad));
    let hw = ho * wo;
    for ch in 0..c {
        let plane = &x[ch * h * w..(ch + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut cols[((ch * k + ky) * k + kx) * hw..][..hw];
                for oy in 0..ho {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    let dst = &mut row[oy * wo..(oy + 1) * wo];
                    if iy < 0 || iy >= h as isize {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        *d = if ix < 0 || ix >= w as isize { T::zero() } else { src[ix as usize] };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: folds a patch matrix back, summing overlaps into `x`.
#[allow(clippy::too_many_arguments)]
pub fn col2im<T: Real>(
    cols: &[T],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    x: &mut [T],
) {
    let (ho, wo) = (conv_out_len(h, k, stride, pad), conv_out_len(w, k, stride, pad));
    let hw = ho * wo;
    for ch in 0..c {
        let plane = &mut x[ch * h * w..(ch + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row = &cols[((ch * k + ky) * k + kx) * hw..][..hw];
                for oy in 0..ho {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, &v) in row[oy * wo..(oy + 1) * wo].iter().enumerate() {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix >= 0 && ix < w as isize {
                            dst[ix as usize] += v;
                        }
                    }
                }
            }
        }
    }
}
