//! Domain-specific preprocessing: bit-plane expansion for the spatial branch,
//! scaled transform coefficients for the frequency branch, and the inverses
//! that turn generator output back into an image.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::codecs::quantize;
use crate::dct::{haar_forward, haar_inverse, BlockDct, FrameDct, BLOCK};
use crate::error::{cfg_err, dim_err, Error, Result};
use crate::image::CoverImage;

/// Bits per pixel value.
pub const BIT_DEPTH: usize = 8;
/// Coefficients are divided by this before they reach a model.
pub const COEFF_SCALE: f64 = 1024.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TransformKind {
    SpatialBitplane,
    #[serde(rename = "BLOCK_DCT_8")]
    BlockDct8,
    FullframeDct,
    HaarDwtL1,
    /// Pixels scaled to [0, 1] with no expansion; the no-preprocessing baseline.
    RawPixel,
}

impl TransformKind {
    /// Candidates considered by the blind transform search, in tie-break order.
    pub const SEARCH_CANDIDATES: [TransformKind; 4] = [
        TransformKind::SpatialBitplane,
        TransformKind::BlockDct8,
        TransformKind::FullframeDct,
        TransformKind::HaarDwtL1,
    ];

    pub fn is_frequency(self) -> bool {
        matches!(self, Self::BlockDct8 | Self::FullframeDct | Self::HaarDwtL1)
    }

    /// Channels of the model-side representation of a `channels`-channel image.
    pub fn rep_channels(self, channels: usize) -> usize {
        match self {
            Self::SpatialBitplane => channels * BIT_DEPTH,
            _ => channels,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::SpatialBitplane => "SPATIAL_BITPLANE",
            Self::BlockDct8 => "BLOCK_DCT_8",
            Self::FullframeDct => "FULLFRAME_DCT",
            Self::HaarDwtL1 => "HAAR_DWT_L1",
            Self::RawPixel => "RAW_PIXEL",
        }
    }

    pub fn check_dims(self, height: usize, width: usize) -> Result<()> {
        let m = match self {
            Self::BlockDct8 => BLOCK,
            Self::HaarDwtL1 => 2,
            _ => 1,
        };
        if height % m != 0 || width % m != 0 {
            return Err(dim_err!("{} needs sides divisible by {m}, got {height}x{width}", self.name()));
        }
        Ok(())
    }
}

impl core::fmt::Display for TransformKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "SPATIAL_BITPLANE" | "BITPLANE" => Ok(Self::SpatialBitplane),
            "BLOCK_DCT_8" | "BLOCK_DCT" => Ok(Self::BlockDct8),
            "FULLFRAME_DCT" => Ok(Self::FullframeDct),
            "HAAR_DWT_L1" | "HAAR" => Ok(Self::HaarDwtL1),
            "RAW_PIXEL" | "RAW" => Ok(Self::RawPixel),
            _ => Err(cfg_err!("unknown transform {s:?}")),
        }
    }
}

/// Bit-planes of an image, planar: plane `c * 8 + i` holds bit `i` (weight
/// `2^i`) of channel `c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitPlaneTensor {
    height: usize,
    width: usize,
    channels: usize,
    planes: Vec<u8>,
}

impl BitPlaneTensor {
    pub fn new(height: usize, width: usize, channels: usize, planes: Vec<u8>) -> Result<Self> {
        if planes.len() != height * width * channels * BIT_DEPTH {
            return Err(dim_err!("bit-plane buffer has {} entries for {height}x{width}x{}", planes.len(), channels * BIT_DEPTH));
        }
        Ok(Self { height, width, channels, planes })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Source-image channels (the tensor holds `8x` as many planes).
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn plane_count(&self) -> usize {
        self.channels * BIT_DEPTH
    }

    pub fn plane(&self, index: usize) -> &[u8] {
        let n = self.height * self.width;
        &self.planes[index * n..(index + 1) * n]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.planes
    }
}

pub fn pixel_expand(img: &CoverImage) -> BitPlaneTensor {
    let (h, w, c) = img.shape();
    let n = h * w;
    let mut planes = alloc::vec![0u8; n * c * BIT_DEPTH];
    for (idx, &v) in img.data().iter().enumerate() {
        let (p, ch) = (idx / c, idx % c);
        for bit in 0..BIT_DEPTH {
            planes[(ch * BIT_DEPTH + bit) * n + p] = (v >> bit) & 1;
        }
    }
    BitPlaneTensor { height: h, width: w, channels: c, planes }
}

pub fn pixel_compose(planes: &BitPlaneTensor) -> Result<CoverImage> {
    if let Some(bad) = planes.planes.iter().find(|&&b| b > 1) {
        return Err(Error::Domain(format!("bit-plane entry {bad} is not binary")));
    }
    let (h, w, c) = (planes.height, planes.width, planes.channels);
    let n = h * w;
    CoverImage::from_fn(h, w, c, |y, x, ch| {
        let p = y * w + x;
        (0..BIT_DEPTH).fold(0u8, |acc, bit| acc | (planes.planes[(ch * BIT_DEPTH + bit) * n + p] << bit))
    })
}

/// Per-channel transform coefficients divided by [`COEFF_SCALE`], planar
/// `C x H x W`. Block-DCT coefficients stay at their block's position.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffTensor {
    kind: TransformKind,
    height: usize,
    width: usize,
    channels: usize,
    coeffs: Vec<f32>,
}

impl CoeffTensor {
    pub fn new(kind: TransformKind, height: usize, width: usize, channels: usize, coeffs: Vec<f32>) -> Result<Self> {
        if !kind.is_frequency() {
            return Err(cfg_err!("{kind} is not a frequency transform"));
        }
        if coeffs.len() != height * width * channels {
            return Err(dim_err!("coefficient buffer has {} entries for {height}x{width}x{channels}", coeffs.len()));
        }
        Ok(Self { kind, height, width, channels, coeffs })
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.coeffs
    }

    /// Coefficient `(y, x)` of channel `c`.
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.coeffs[(c * self.height + y) * self.width + x]
    }
}

/// Unscaled real-valued forward transform of one plane.
pub fn forward_real(plane: &[f64], height: usize, width: usize, kind: TransformKind) -> Result<Vec<f64>> {
    kind.check_dims(height, width)?;
    Ok(match kind {
        TransformKind::BlockDct8 => BlockDct::default().forward_plane(plane, height, width),
        TransformKind::FullframeDct => FrameDct::new(height, width).forward(plane),
        TransformKind::HaarDwtL1 => haar_forward(plane, height, width),
        _ => return Err(cfg_err!("{kind} is not a frequency transform")),
    })
}

pub fn inverse_real(coeffs: &[f64], height: usize, width: usize, kind: TransformKind) -> Result<Vec<f64>> {
    kind.check_dims(height, width)?;
    Ok(match kind {
        TransformKind::BlockDct8 => BlockDct::default().inverse_plane(coeffs, height, width),
        TransformKind::FullframeDct => FrameDct::new(height, width).inverse(coeffs),
        TransformKind::HaarDwtL1 => haar_inverse(coeffs, height, width),
        _ => return Err(cfg_err!("{kind} is not a frequency transform")),
    })
}

pub fn to_frequency(img: &CoverImage, kind: TransformKind) -> Result<CoeffTensor> {
    let (h, w, c) = img.shape();
    let mut coeffs = Vec::with_capacity(h * w * c);
    for ch in 0..c {
        let plane: Vec<f64> = img.channel(ch).iter().map(|&v| v as f64).collect();
        coeffs.extend(forward_real(&plane, h, w, kind)?.iter().map(|&v| (v / COEFF_SCALE) as f32));
    }
    CoeffTensor::new(kind, h, w, c, coeffs)
}

pub fn from_frequency(coeffs: &CoeffTensor) -> Result<CoverImage> {
    let (h, w, c) = (coeffs.height, coeffs.width, coeffs.channels);
    let n = h * w;
    let mut out = CoverImage::filled(h, w, c, 0)?;
    for ch in 0..c {
        let plane: Vec<f64> = coeffs.coeffs[ch * n..(ch + 1) * n].iter().map(|&v| v as f64 * COEFF_SCALE).collect();
        let pixels: Vec<u8> = inverse_real(&plane, h, w, coeffs.kind)?.into_iter().map(quantize).collect();
        out.set_channel(ch, &pixels);
    }
    Ok(out)
}

/// Model-side representation of an image under any [`TransformKind`], as a
/// planar `f32` buffer of `kind.rep_channels(C)` planes.
pub fn encode(img: &CoverImage, kind: TransformKind) -> Result<Vec<f32>> {
    kind.check_dims(img.height(), img.width())?;
    Ok(match kind {
        TransformKind::SpatialBitplane => pixel_expand(img).planes.iter().map(|&b| b as f32).collect(),
        TransformKind::RawPixel => {
            let n = img.height() * img.width();
            let mut out = Vec::with_capacity(n * img.channels());
            for ch in 0..img.channels() {
                out.extend(img.channel(ch).iter().map(|&v| v as f32 / 255.0));
            }
            out
        }
        _ => to_frequency(img, kind)?.coeffs,
    })
}

/// Inverse of [`encode`] for continuous model output: bit-planes are
/// thresholded at 0.5, raw pixels rescaled, coefficients inverse-transformed;
/// everything is rounded and clipped to a valid 8-bit image.
pub fn decode(rep: &[f32], height: usize, width: usize, channels: usize, kind: TransformKind) -> Result<CoverImage> {
    let expected = height * width * kind.rep_channels(channels);
    if rep.len() != expected {
        return Err(dim_err!("representation has {} values, {kind} needs {expected}", rep.len()));
    }
    match kind {
        TransformKind::SpatialBitplane => {
            let planes = rep.iter().map(|&v| (v >= 0.5) as u8).collect();
            pixel_compose(&BitPlaneTensor::new(height, width, channels, planes)?)
        }
        TransformKind::RawPixel => {
            let n = height * width;
            let mut out = CoverImage::filled(height, width, channels, 0)?;
            for ch in 0..channels {
                let plane: Vec<u8> = rep[ch * n..(ch + 1) * n].iter().map(|&v| quantize(v as f64 * 255.0)).collect();
                out.set_channel(ch, &plane);
            }
            Ok(out)
        }
        _ => from_frequency(&CoeffTensor::new(kind, height, width, channels, rep.to_vec())?),
    }
}
