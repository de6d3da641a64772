//! Raster and payload containers shared by every module.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};

/// 8-bit raster stored row-major with interleaved channels (`C` = 1 or 3).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CoverImage {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<u8>,
}

impl CoverImage {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(dim_err!("channel count must be 1 or 3, got {channels}"));
        }
        if height == 0 || width == 0 {
            return Err(dim_err!("empty image {height}x{width}"));
        }
        if data.len() != height * width * channels {
            return Err(dim_err!(
                "buffer holds {} values, expected {height}x{width}x{channels}",
                data.len()
            ));
        }
        Ok(Self { height, width, channels, data })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> u8,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::new(height, width, channels, data)
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

    /// `(height, width, channels)`
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: u8) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Row-major copy of one channel.
    pub fn channel(&self, c: usize) -> Vec<u8> {
        self.data.iter().skip(c).step_by(self.channels).copied().collect()
    }

    pub fn set_channel(&mut self, c: usize, plane: &[u8]) {
        debug_assert_eq!(plane.len(), self.height * self.width);
        for (dst, &v) in self.data.iter_mut().skip(c).step_by(self.channels).zip(plane) {
            *dst = v;
        }
    }

    /// Center crop to `height x width`.
    pub fn center_crop(&self, height: usize, width: usize) -> Result<Self> {
        if height > self.height || width > self.width {
            return Err(dim_err!(
                "cannot crop {}x{} image to {height}x{width}",
                self.height,
                self.width
            ));
        }
        let y0 = (self.height - height) / 2;
        let x0 = (self.width - width) / 2;
        Self::from_fn(height, width, self.channels, |y, x, c| self.get(y0 + y, x0 + x, c))
    }

    pub fn ensure_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(dim_err!("shape {:?} vs {:?}", self.shape(), other.shape()));
        }
        Ok(())
    }
}

/// How payload bits map onto the cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadKind {
    /// One bit per pixel position (spatial codecs).
    PerPixel,
    /// One bit per 8x8 block (block-DCT codec).
    PerBlock,
}

impl PayloadKind {
    /// Payload shape for a cover of the given size.
    pub fn shape_for(self, height: usize, width: usize) -> (usize, usize) {
        match self {
            PayloadKind::PerPixel => (height, width),
            PayloadKind::PerBlock => (height / 8, width / 8),
        }
    }
}

/// Binary matrix embedded by a codec, stored row-major with entries in {0, 1}.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WatermarkPayload {
    height: usize,
    width: usize,
    kind: PayloadKind,
    bits: Vec<u8>,
}

impl WatermarkPayload {
    pub fn new(height: usize, width: usize, kind: PayloadKind, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(dim_err!(
                "payload holds {} bits, expected {height}x{width}",
                bits.len()
            ));
        }
        if let Some(bad) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::Domain(alloc::format!("payload entry {bad} is not binary")));
        }
        Ok(Self { height, width, kind, bits })
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        kind: PayloadKind,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Self {
        let mut bits = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(y, x) as u8);
            }
        }
        Self { height, width, kind, bits }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn kind(&self) -> PayloadKind {
        self.kind
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.bits[y * self.width + x]
    }

    pub fn inverted(&self) -> Self {
        Self {
            bits: self.bits.iter().map(|b| b ^ 1).collect(),
            ..self.clone()
        }
    }

    /// Checks that this payload fits a cover of `height x width`.
    pub fn ensure_fits(&self, height: usize, width: usize) -> Result<()> {
        let expected = self.kind.shape_for(height, width);
        if (self.height, self.width) != expected {
            return Err(dim_err!(
                "{:?} payload is {}x{}, cover {height}x{width} needs {}x{}",
                self.kind,
                self.height,
                self.width,
                expected.0,
                expected.1
            ));
        }
        Ok(())
    }

    /// Renders the payload as a gray image with bits mapped to {0, 255}; block
    /// payloads are drawn at pixel resolution (each bit covers an 8x8 tile).
    pub fn to_image(&self) -> CoverImage {
        let scale = match self.kind {
            PayloadKind::PerPixel => 1,
            PayloadKind::PerBlock => 8,
        };
        CoverImage::from_fn(self.height * scale, self.width * scale, 1, |y, x, _| {
            self.get(y / scale, x / scale) * 255
        })
        .expect("payload dimensions are non-zero")
    }

    /// Inverse of [`to_image`](Self::to_image) at pixel resolution: threshold at 128.
    pub fn from_image(img: &CoverImage, kind: PayloadKind) -> Result<Self> {
        if img.channels() != 1 {
            return Err(dim_err!("payload image must be single-channel"));
        }
        Ok(Self::from_fn(img.height(), img.width(), kind, |y, x| img.get(y, x, 0) >= 128))
    }
}
