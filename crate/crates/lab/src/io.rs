//! Lossless image files. PNG and BMP are read; only PNG is written.

use std::fs;
use std::path::Path;

use image::{DynamicImage, ImageFormat, ImageReader};
use sha2::{Digest, Sha256};
use wmfaker_core::{CoverImage, PayloadKind, WatermarkPayload};

use crate::error::{io_err, LabError, Result};

const LOSSY: &[&str] = &["jpg", "jpeg", "webp", "gif", "avif", "heic"];
const LOSSLESS: &[&str] = &["png", "bmp"];

fn extension(path: &Path) -> Option<String> {
    path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase)
}

pub fn is_lossy(path: &Path) -> bool {
    extension(path).is_some_and(|e| LOSSY.contains(&e.as_str()))
}

pub fn is_supported(path: &Path) -> bool {
    extension(path).is_some_and(|e| LOSSLESS.contains(&e.as_str()))
}

/// Reads an 8-bit gray or RGB image. Alpha is dropped; deeper samples and
/// lossy formats are rejected.
pub fn load_image(path: &Path) -> Result<CoverImage> {
    if is_lossy(path) {
        return Err(LabError::Format(format!("{}: lossy formats are not accepted", path.display())));
    }
    let reader = ImageReader::open(path).map_err(io_err(path))?.with_guessed_format().map_err(io_err(path))?;
    match reader.format() {
        Some(ImageFormat::Png | ImageFormat::Bmp) => {}
        other => return Err(LabError::Format(format!("{}: unsupported format {other:?}", path.display()))),
    }
    let img = reader.decode().map_err(|source| LabError::Image { path: path.into(), source })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let cover = match img {
        DynamicImage::ImageLuma8(g) => CoverImage::new(h, w, 1, g.into_raw())?,
        DynamicImage::ImageLumaA8(_) => CoverImage::new(h, w, 1, img.to_luma8().into_raw())?,
        DynamicImage::ImageRgb8(rgb) => CoverImage::new(h, w, 3, rgb.into_raw())?,
        DynamicImage::ImageRgba8(_) => CoverImage::new(h, w, 3, img.to_rgb8().into_raw())?,
        other => {
            return Err(LabError::Format(format!("{}: expected 8-bit samples, got {:?}", path.display(), other.color())))
        }
    };
    Ok(cover)
}

pub fn encode_png(img: &CoverImage) -> Result<Vec<u8>> {
    let color = if img.channels() == 1 { image::ExtendedColorType::L8 } else { image::ExtendedColorType::Rgb8 };
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(img.data(), img.width() as u32, img.height() as u32, color)
        .map_err(|e| LabError::Format(format!("png encoding failed: {e}")))?;
    Ok(out)
}

use image::ImageEncoder;

pub fn save_image(path: &Path, img: &CoverImage) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, encode_png(img)?).map_err(io_err(path))
}

/// Payload stored as a gray PNG with bits at {0, 255}.
pub fn load_payload(path: &Path, kind: PayloadKind) -> Result<WatermarkPayload> {
    let img = load_image(path)?;
    Ok(WatermarkPayload::from_image(&img, kind)?)
}

/// Saves the payload at its own resolution.
pub fn save_payload(path: &Path, wm: &WatermarkPayload) -> Result<()> {
    let img = CoverImage::from_fn(wm.height(), wm.width(), 1, |y, x, _| wm.get(y, x) * 255)?;
    save_image(path, &img)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(io_err(path))?))
}
