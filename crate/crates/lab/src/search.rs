//! Blind transform search: probe-train one faker per candidate
//! representation and keep the one whose forgeries extract best.

use log::info;
use serde::{Deserialize, Serialize};
use wmfaker_core::codecs::extract;
use wmfaker_core::faker::{Faker, TrainConfig};
use wmfaker_core::metrics::payload_ssim;
use wmfaker_core::transforms::TransformKind;

use crate::data::{PairedDataset, Split};
use crate::error::{LabError, Result};
use crate::train::run_steps;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub transform: TransformKind,
    /// Mean watermark SSIM between payloads extracted from fakes and from
    /// the real watermarked images of the validation split.
    pub score: f64,
    pub final_l1: f32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub probe_steps: u64,
    pub probes: Vec<Probe>,
    pub chosen: TransformKind,
}

/// Mean payload SSIM of fake vs real extractions over `split`.
pub fn watermark_score(faker: &Faker, dataset: &PairedDataset, split: Split) -> Result<f64> {
    let ids = dataset.split(split);
    if ids.is_empty() {
        return Err(LabError::Data(format!("{split:?} split is empty")));
    }
    let codec = &dataset.manifest.codec;
    let mut total = 0.0;
    for &i in ids {
        let (orig, marked) = dataset.load_pair(i)?;
        let fake = faker.fake_watermark(&orig, faker.transform())?;
        total += payload_ssim(&extract(&fake, codec)?, &extract(&marked, codec)?)?;
    }
    Ok(total / ids.len() as f64)
}

/// Ties go to the earlier candidate. A lone candidate is returned as is,
/// with no probes.
pub fn blind_transform_search(
    dataset: &PairedDataset,
    base: &TrainConfig,
    probe_steps: u64,
    candidates: &[TransformKind],
) -> Result<SearchReport> {
    if candidates.is_empty() {
        return Err(LabError::Config("no candidate transforms".into()));
    }
    if dataset.is_empty() || dataset.split(Split::Train).is_empty() {
        return Err(LabError::Data("dataset has no training pairs".into()));
    }
    if let [only] = candidates {
        return Ok(SearchReport { probe_steps, probes: Vec::new(), chosen: *only });
    }
    let mut probes = Vec::new();
    for &transform in candidates {
        let config = TrainConfig { transform, steps: probe_steps, ..*base };
        let data = dataset.preload(Split::Train, transform)?;
        let mut faker = Faker::new(config, dataset.channels())?;
        let mut final_l1 = f32::NAN;
        run_steps(&mut faker, &data, probe_steps, |_, s| {
            final_l1 = s.g_l1;
            Ok(())
        })?;
        let score = watermark_score(&faker, dataset, Split::Val)?;
        info!("probe {transform}: watermark SSIM {score:.4}");
        probes.push(Probe { transform, score, final_l1 });
    }
    let best = probes.iter().fold(&probes[0], |b, p| if p.score > b.score { p } else { b });
    let chosen = best.transform;
    Ok(SearchReport { probe_steps, probes, chosen })
}
