//! PSNR, SSIM and bit error rate.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Result};
use crate::image::{CoverImage, WatermarkPayload};

/// Returned by [`psnr`] for identical inputs.
pub const PSNR_CAP_DB: f64 = 100.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
const PEAK: f64 = 255.0;

pub fn mse(a: &CoverImage, b: &CoverImage) -> Result<f64> {
    a.ensure_same_shape(b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(sum / a.data().len() as f64)
}

pub fn psnr(a: &CoverImage, b: &CoverImage) -> Result<f64> {
    let mse = mse(a, b)?;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok(10.0 * libm::log10(PEAK * PEAK / mse))
}

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let mut taps = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - half;
        *t = libm::exp(-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA));
    }
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);
    taps
}

/// Valid-mode separable filtering of a row-major plane.
fn filter_valid(plane: &[f64], height: usize, width: usize, taps: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (oh, ow) = (height + 1 - SSIM_WINDOW, width + 1 - SSIM_WINDOW);
    let mut rows = vec![0.0; height * ow];
    for y in 0..height {
        let src = &plane[y * width..(y + 1) * width];
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().zip(&src[x..x + SSIM_WINDOW]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for (k, t) in taps.iter().enumerate() {
            let src = &rows[(y + k) * ow..(y + k + 1) * ow];
            for (o, v) in out[y * ow..(y + 1) * ow].iter_mut().zip(src) {
                *o += t * v;
            }
        }
    }
    out
}

fn ssim_plane(a: &[f64], b: &[f64], height: usize, width: usize) -> f64 {
    let taps = gaussian_taps();
    let c1 = (SSIM_K1 * PEAK) * (SSIM_K1 * PEAK);
    let c2 = (SSIM_K2 * PEAK) * (SSIM_K2 * PEAK);
    let sq = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).collect::<Vec<_>>();
    let mu_a = filter_valid(a, height, width, &taps);
    let mu_b = filter_valid(b, height, width, &taps);
    let e_aa = filter_valid(&sq(a, a), height, width, &taps);
    let e_bb = filter_valid(&sq(b, b), height, width, &taps);
    let e_ab = filter_valid(&sq(a, b), height, width, &taps);
    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = e_aa[i] - ma * ma;
        let var_b = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
    }
    total / mu_a.len() as f64
}

/// Mean local SSIM (11x11 Gaussian window, sigma 1.5), averaged over channels.
pub fn ssim(a: &CoverImage, b: &CoverImage) -> Result<f64> {
    a.ensure_same_shape(b)?;
    let (h, w, c) = a.shape();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(dim_err!("SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}"));
    }
    let to_f64 = |img: &CoverImage, ch| img.channel(ch).iter().map(|&v| v as f64).collect::<Vec<_>>();
    let total: f64 = (0..c).map(|ch| ssim_plane(&to_f64(a, ch), &to_f64(b, ch), h, w)).sum();
    Ok(total / c as f64)
}

fn ensure_same_payload_shape(a: &WatermarkPayload, b: &WatermarkPayload) -> Result<()> {
    if (a.height(), a.width(), a.kind()) != (b.height(), b.width(), b.kind()) {
        return Err(dim_err!(
            "payload {}x{} {:?} vs {}x{} {:?}",
            a.height(),
            a.width(),
            a.kind(),
            b.height(),
            b.width(),
            b.kind()
        ));
    }
    Ok(())
}

/// Fraction of differing bits.
pub fn ber(a: &WatermarkPayload, b: &WatermarkPayload) -> Result<f64> {
    ensure_same_payload_shape(a, b)?;
    let diff = a.bits().iter().zip(b.bits()).filter(|(x, y)| x != y).count();
    Ok(diff as f64 / a.bits().len() as f64)
}

/// PSNR between payloads rendered at {0, 255}.
pub fn payload_psnr(a: &WatermarkPayload, b: &WatermarkPayload) -> Result<f64> {
    ensure_same_payload_shape(a, b)?;
    psnr(&a.to_image(), &b.to_image())
}

/// SSIM between payloads rendered at {0, 255}; block payloads are drawn at
/// pixel resolution first.
pub fn payload_ssim(a: &WatermarkPayload, b: &WatermarkPayload) -> Result<f64> {
    ensure_same_payload_shape(a, b)?;
    ssim(&a.to_image(), &b.to_image())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub id: String,
    pub psnr_db: f64,
    pub ssim: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ber: Option<f64>,
}

impl PairMetrics {
    pub fn images(id: impl Into<String>, a: &CoverImage, b: &CoverImage) -> Result<Self> {
        Ok(Self { id: id.into(), psnr_db: psnr(a, b)?, ssim: ssim(a, b)?, ber: None })
    }

    pub fn payloads(id: impl Into<String>, a: &WatermarkPayload, b: &WatermarkPayload) -> Result<Self> {
        Ok(Self {
            id: id.into(),
            psnr_db: payload_psnr(a, b)?,
            ssim: payload_ssim(a, b)?,
            ber: Some(ber(a, b)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub mean_psnr_db: f64,
    pub mean_ssim: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_ber: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_pair: Vec<PairMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregates: Option<Aggregates>,
}

impl MetricsReport {
    pub fn from_pairs(per_pair: Vec<PairMetrics>) -> Self {
        let aggregates = Self::aggregate(&per_pair);
        Self { per_pair, aggregates }
    }

    /// Arithmetic means over `pairs`; `None` when empty. BER is averaged only
    /// when every pair carries one.
    pub fn aggregate(pairs: &[PairMetrics]) -> Option<Aggregates> {
        if pairs.is_empty() {
            return None;
        }
        let n = pairs.len() as f64;
        let mean_ber = pairs
            .iter()
            .map(|p| p.ber)
            .collect::<Option<Vec<_>>>()
            .map(|b| b.iter().sum::<f64>() / n);
        Some(Aggregates {
            mean_psnr_db: pairs.iter().map(|p| p.psnr_db).sum::<f64>() / n,
            mean_ssim: pairs.iter().map(|p| p.ssim).sum::<f64>() / n,
            mean_ber,
        })
    }

    /// True when the stored aggregates match a recomputation from `per_pair`.
    pub fn is_consistent(&self) -> bool {
        self.aggregates == Self::aggregate(&self.per_pair)
    }
}
