//! Forgery evaluation: image-level and watermark-level metrics plus a
//! side-by-side comparison grid.

use std::path::Path;

use serde::{Deserialize, Serialize};
use wmfaker_core::codecs::extract;
use wmfaker_core::faker::Faker;
use wmfaker_core::metrics::{MetricsReport, PairMetrics};
use wmfaker_core::transforms::TransformKind;
use wmfaker_core::CoverImage;

use crate::data::{PairedDataset, Split};
use crate::error::{LabError, Result};
use crate::io::save_image;

/// Four metric blocks over one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub transform: TransformKind,
    pub split: Split,
    /// Fake watermarked image vs real watermarked image.
    pub image: MetricsReport,
    /// Payload extracted from the fake vs from the real watermarked image.
    pub watermark: MetricsReport,
    /// Payload extracted from the fake vs the embedded payload.
    pub fake_vs_truth: MetricsReport,
    /// Payload extracted from the real watermarked image vs the embedded payload.
    pub real_vs_truth: MetricsReport,
}

/// Images for one grid row: original, real, fake, real payload, fake payload.
#[derive(Debug, Clone)]
pub struct GridRow {
    pub original: CoverImage,
    pub real: CoverImage,
    pub fake: CoverImage,
    pub real_payload: CoverImage,
    pub fake_payload: CoverImage,
}

/// Any source of fake watermarked images.
pub trait Forger {
    fn transform(&self) -> TransformKind;
    fn forge(&self, original: &CoverImage) -> Result<CoverImage>;
}

impl Forger for Faker {
    fn transform(&self) -> TransformKind {
        Faker::transform(self)
    }

    fn forge(&self, original: &CoverImage) -> Result<CoverImage> {
        Ok(self.fake_watermark(original, Faker::transform(self))?)
    }
}

/// Evaluates `forger` on `split`; `limit` caps the number of pairs.
pub fn evaluate(
    forger: &impl Forger,
    dataset: &PairedDataset,
    split: Split,
    limit: Option<usize>,
) -> Result<(EvalReport, Vec<GridRow>)> {
    let ids = dataset.split(split);
    let ids = &ids[..limit.map_or(ids.len(), |n| n.min(ids.len()))];
    if ids.is_empty() {
        return Err(LabError::Data(format!("{split:?} split is empty")));
    }
    let codec = &dataset.manifest.codec;
    let (mut image, mut watermark, mut fake_truth, mut real_truth, mut rows) = (vec![], vec![], vec![], vec![], vec![]);
    for &i in ids {
        let id = dataset.manifest.samples[i].id.clone();
        let (original, real) = dataset.load_pair(i)?;
        let truth = dataset.watermark_for(&original)?;
        let fake = forger.forge(&original)?;
        let (w_real, w_fake) = (extract(&real, codec)?, extract(&fake, codec)?);
        image.push(PairMetrics::images(id.clone(), &fake, &real)?);
        watermark.push(PairMetrics::payloads(id.clone(), &w_fake, &w_real)?);
        fake_truth.push(PairMetrics::payloads(id.clone(), &w_fake, &truth)?);
        real_truth.push(PairMetrics::payloads(id, &w_real, &truth)?);
        rows.push(GridRow { original, real, fake, real_payload: w_real.to_image(), fake_payload: w_fake.to_image() });
    }
    let report = EvalReport {
        transform: forger.transform(),
        split,
        image: MetricsReport::from_pairs(image),
        watermark: MetricsReport::from_pairs(watermark),
        fake_vs_truth: MetricsReport::from_pairs(fake_truth),
        real_vs_truth: MetricsReport::from_pairs(real_truth),
    };
    Ok((report, rows))
}

/// Writes rows side by side as one RGB PNG with 2-pixel white gutters.
pub fn write_grid(path: &Path, rows: &[GridRow]) -> Result<()> {
    const GAP: usize = 2;
    let first = rows.first().ok_or_else(|| LabError::Data("no rows for the grid".into()))?;
    let (h, w) = (first.original.height(), first.original.width());
    let (cols, n) = (5, rows.len());
    let (gh, gw) = (n * h + (n + 1) * GAP, cols * w + (cols + 1) * GAP);
    let mut grid = CoverImage::filled(gh, gw, 3, 255)?;
    for (r, row) in rows.iter().enumerate() {
        let cells = [&row.original, &row.real, &row.fake, &row.real_payload, &row.fake_payload];
        for (c, img) in cells.into_iter().enumerate() {
            let (oy, ox) = (GAP + r * (h + GAP), GAP + c * (w + GAP));
            for y in 0..img.height().min(h) {
                for x in 0..img.width().min(w) {
                    for ch in 0..3 {
                        let v = img.get(y, x, ch.min(img.channels() - 1));
                        grid.set(oy + y, ox + x, ch, v);
                    }
                }
            }
        }
    }
    save_image(path, &grid)
}
