//! Orthonormal real transforms on `f64` planes: DCT-II (and its inverse) of
//! arbitrary size, the 8x8 block variant, and the single-level Haar DWT.
//!
//! Planes are row-major `height x width` slices. All transforms here are
//! orthonormal, so inverse(forward(x)) == x up to floating-point error.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

pub const BLOCK: usize = 8;

/// Orthonormal DCT-II basis of size `n`: `basis[k * n + i]` is the weight of
/// sample `i` in coefficient `k`.
pub fn dct_basis(n: usize) -> Vec<f64> {
    let mut basis = vec![0.0; n * n];
    let nf = n as f64;
    for k in 0..n {
        let scale = if k == 0 { libm::sqrt(1.0 / nf) } else { libm::sqrt(2.0 / nf) };
        for i in 0..n {
            basis[k * n + i] = scale * libm::cos(PI * (2 * i + 1) as f64 * k as f64 / (2.0 * nf));
        }
    }
    basis
}

/// Precomputed 8x8 orthonormal DCT.
#[derive(Debug, Clone)]
pub struct BlockDct {
    basis: Vec<f64>,
}

impl Default for BlockDct {
    fn default() -> Self {
        Self { basis: dct_basis(BLOCK) }
    }
}

impl BlockDct {
    /// `coeffs[u * 8 + v]`, `u` the vertical frequency index.
    pub fn forward(&self, block: &[f64; 64]) -> [f64; 64] {
        let mut tmp = [0.0; 64];
        // rows: tmp[y][v] = sum_x B[v][x] * block[y][x]
        for y in 0..BLOCK {
            for v in 0..BLOCK {
                let mut acc = 0.0;
                for x in 0..BLOCK {
                    acc += self.basis[v * BLOCK + x] * block[y * BLOCK + x];
                }
                tmp[y * BLOCK + v] = acc;
            }
        }
        let mut out = [0.0; 64];
        for u in 0..BLOCK {
            for v in 0..BLOCK {
                let mut acc = 0.0;
                for y in 0..BLOCK {
                    acc += self.basis[u * BLOCK + y] * tmp[y * BLOCK + v];
                }
                out[u * BLOCK + v] = acc;
            }
        }
        out
    }

    pub fn inverse(&self, coeffs: &[f64; 64]) -> [f64; 64] {
        let mut tmp = [0.0; 64];
        for u in 0..BLOCK {
            for x in 0..BLOCK {
                let mut acc = 0.0;
                for v in 0..BLOCK {
                    acc += self.basis[v * BLOCK + x] * coeffs[u * BLOCK + v];
                }
                tmp[u * BLOCK + x] = acc;
            }
        }
        let mut out = [0.0; 64];
        for y in 0..BLOCK {
            for x in 0..BLOCK {
                let mut acc = 0.0;
                for u in 0..BLOCK {
                    acc += self.basis[u * BLOCK + y] * tmp[u * BLOCK + x];
                }
                out[y * BLOCK + x] = acc;
            }
        }
        out
    }

    /// Blockwise transform of a plane whose sides are multiples of 8, with
    /// every block's coefficients written back at the block's own position.
    pub fn forward_plane(&self, plane: &[f64], height: usize, width: usize) -> Vec<f64> {
        self.map_blocks(plane, height, width, |b| self.forward(b))
    }

    pub fn inverse_plane(&self, plane: &[f64], height: usize, width: usize) -> Vec<f64> {
        self.map_blocks(plane, height, width, |b| self.inverse(b))
    }

    fn map_blocks(
        &self,
        plane: &[f64],
        height: usize,
        width: usize,
        f: impl Fn(&[f64; 64]) -> [f64; 64],
    ) -> Vec<f64> {
        debug_assert!(height % BLOCK == 0 && width % BLOCK == 0);
        let mut out = vec![0.0; height * width];
        for by in (0..height).step_by(BLOCK) {
            for bx in (0..width).step_by(BLOCK) {
                let block = read_block(plane, width, by, bx);
                write_block(&mut out, width, by, bx, &f(&block));
            }
        }
        out
    }
}

pub fn read_block(plane: &[f64], width: usize, by: usize, bx: usize) -> [f64; 64] {
    let mut block = [0.0; 64];
    for y in 0..BLOCK {
        let row = (by + y) * width + bx;
        block[y * BLOCK..(y + 1) * BLOCK].copy_from_slice(&plane[row..row + BLOCK]);
    }
    block
}

pub fn write_block(plane: &mut [f64], width: usize, by: usize, bx: usize, block: &[f64; 64]) {
    for y in 0..BLOCK {
        let row = (by + y) * width + bx;
        plane[row..row + BLOCK].copy_from_slice(&block[y * BLOCK..(y + 1) * BLOCK]);
    }
}

/// Separable full-frame orthonormal DCT-II.
#[derive(Debug, Clone)]
pub struct FrameDct {
    height: usize,
    width: usize,
    rows: Vec<f64>,
    cols: Vec<f64>,
}

impl FrameDct {
    pub fn new(height: usize, width: usize) -> Self {
        Self { height, width, rows: dct_basis(height), cols: dct_basis(width) }
    }

    pub fn forward(&self, plane: &[f64]) -> Vec<f64> {
        let (h, w) = (self.height, self.width);
        // out = R * X * C^T
        let mut tmp = vec![0.0; h * w];
        for y in 0..h {
            for v in 0..w {
                let basis = &self.cols[v * w..(v + 1) * w];
                tmp[y * w + v] = basis.iter().zip(&plane[y * w..(y + 1) * w]).map(|(a, b)| a * b).sum();
            }
        }
        let mut out = vec![0.0; h * w];
        for u in 0..h {
            let basis = &self.rows[u * h..(u + 1) * h];
            for (y, &b) in basis.iter().enumerate() {
                let src = &tmp[y * w..(y + 1) * w];
                for (o, &t) in out[u * w..(u + 1) * w].iter_mut().zip(src) {
                    *o += b * t;
                }
            }
        }
        out
    }

    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        let (h, w) = (self.height, self.width);
        // X = R^T * Y * C
        let mut tmp = vec![0.0; h * w];
        for u in 0..h {
            for v in 0..w {
                let c = coeffs[u * w + v];
                if c == 0.0 {
                    continue;
                }
                let basis = &self.cols[v * w..(v + 1) * w];
                for (t, &b) in tmp[u * w..(u + 1) * w].iter_mut().zip(basis) {
                    *t += c * b;
                }
            }
        }
        let mut out = vec![0.0; h * w];
        for u in 0..h {
            let src = &tmp[u * w..(u + 1) * w];
            for y in 0..h {
                let b = self.rows[u * h + y];
                for (o, &t) in out[y * w..(y + 1) * w].iter_mut().zip(src) {
                    *o += b * t;
                }
            }
        }
        out
    }
}

/// Single-level orthonormal 2-D Haar transform. The output uses the usual
/// quadrant layout: LL top-left, horizontal detail top-right, vertical detail
/// bottom-left, diagonal detail bottom-right.
pub fn haar_forward(plane: &[f64], height: usize, width: usize) -> Vec<f64> {
    debug_assert!(height % 2 == 0 && width % 2 == 0);
    let (hh, hw) = (height / 2, width / 2);
    let mut out = vec![0.0; height * width];
    for y in 0..hh {
        for x in 0..hw {
            let a = plane[(2 * y) * width + 2 * x];
            let b = plane[(2 * y) * width + 2 * x + 1];
            let c = plane[(2 * y + 1) * width + 2 * x];
            let d = plane[(2 * y + 1) * width + 2 * x + 1];
            out[y * width + x] = (a + b + c + d) / 2.0;
            out[y * width + hw + x] = (a - b + c - d) / 2.0;
            out[(hh + y) * width + x] = (a + b - c - d) / 2.0;
            out[(hh + y) * width + hw + x] = (a - b - c + d) / 2.0;
        }
    }
    out
}

pub fn haar_inverse(coeffs: &[f64], height: usize, width: usize) -> Vec<f64> {
    let (hh, hw) = (height / 2, width / 2);
    let mut out = vec![0.0; height * width];
    for y in 0..hh {
        for x in 0..hw {
            let ll = coeffs[y * width + x];
            let lh = coeffs[y * width + hw + x];
            let hl = coeffs[(hh + y) * width + x];
            let d = coeffs[(hh + y) * width + hw + x];
            out[(2 * y) * width + 2 * x] = (ll + lh + hl + d) / 2.0;
            out[(2 * y) * width + 2 * x + 1] = (ll - lh + hl - d) / 2.0;
            out[(2 * y + 1) * width + 2 * x] = (ll + lh - hl - d) / 2.0;
            out[(2 * y + 1) * width + 2 * x + 1] = (ll - lh - hl + d) / 2.0;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    // Direct O(n^4) definition of the orthonormal 2-D DCT-II.
    fn naive_dct2(x: &[f64], h: usize, w: usize) -> Vec<f64> {
        let alpha = |k: usize, n: usize| if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        let mut out = vec![0.0; h * w];
        for u in 0..h {
            for v in 0..w {
                let mut acc = 0.0;
                for y in 0..h {
                    for xx in 0..w {
                        acc += x[y * w + xx]
                            * (PI * (2 * y + 1) as f64 * u as f64 / (2 * h) as f64).cos()
                            * (PI * (2 * xx + 1) as f64 * v as f64 / (2 * w) as f64).cos();
                    }
                }
                out[u * w + v] = alpha(u, h) * alpha(v, w) * acc;
            }
        }
        out
    }

    fn sample(n: usize) -> Vec<f64> {
        (0..n).map(|i| ((i * 37 + 11) % 251) as f64).collect()
    }

    #[test]
    fn block_dct_matches_definition() {
        let x = sample(64);
        let mut block = [0.0; 64];
        block.copy_from_slice(&x);
        let got = BlockDct::default().forward(&block);
        let want = naive_dct2(&x, 8, 8);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_block_has_only_dc() {
        let c = BlockDct::default().forward(&[128.0; 64]);
        assert!((c[0] - 1024.0).abs() < 1e-9);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn frame_dct_matches_definition_and_inverts() {
        let (h, w) = (6, 10);
        let x = sample(h * w);
        let t = FrameDct::new(h, w);
        let got = t.forward(&x);
        for (g, e) in got.iter().zip(&naive_dct2(&x, h, w)) {
            assert!((g - e).abs() < 1e-9);
        }
        for (a, b) in t.inverse(&got).iter().zip(&x) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn haar_inverts_and_preserves_energy() {
        let (h, w) = (4, 6);
        let x = sample(h * w);
        let c = haar_forward(&x, h, w);
        let e0: f64 = x.iter().map(|v| v * v).sum();
        let e1: f64 = c.iter().map(|v| v * v).sum();
        assert!((e0 - e1).abs() < 1e-6);
        for (a, b) in haar_inverse(&c, h, w).iter().zip(&x) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
