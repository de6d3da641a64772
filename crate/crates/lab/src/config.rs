//! TOML experiment configuration. Unknown keys are rejected everywhere.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wmfaker_core::codecs::CodecConfig;
use wmfaker_core::faker::TrainConfig;
use wmfaker_core::transforms::TransformKind;
use wmfaker_core::WatermarkPayload;

use crate::data::{DatasetOptions, Split, WatermarkSource};
use crate::error::{io_err, LabError, Result};
use crate::{io, synth};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub corpus_dir: PathBuf,
    pub out_dir: PathBuf,
    pub crop: usize,
    pub seed: u64,
    pub val_ratio: f64,
    pub test_ratio: f64,
    /// `"logo"` for the built-in logo, `"per-image"`, or a path to a PNG.
    pub watermark: String,
    pub limit: Option<usize>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            corpus_dir: "corpus".into(),
            out_dir: "runs/data".into(),
            crop: 64,
            seed: 0,
            val_ratio: 0.1,
            test_ratio: 0.1,
            watermark: "logo".into(),
            limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSection {
    pub probe_steps: u64,
    pub candidates: Vec<TransformKind>,
}

impl Default for SearchSection {
    fn default() -> Self {
        Self { probe_steps: 300, candidates: TransformKind::SEARCH_CANDIDATES.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub metrics: Vec<String>,
    pub split: Split,
    pub limit: Option<usize>,
    pub report: PathBuf,
    pub grid: PathBuf,
    pub grid_rows: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            metrics: vec!["psnr".into(), "ssim".into(), "ber".into()],
            split: Split::Test,
            limit: None,
            report: "runs/report.json".into(),
            grid: "runs/grid.png".into(),
            grid_rows: 4,
        }
    }
}

pub const KNOWN_METRICS: &[&str] = &["psnr", "ssim", "ber"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub codec: CodecConfig,
    pub data: DataSection,
    pub faker: TrainConfig,
    pub search: SearchSection,
    pub eval: EvalSection,
    /// Directory for loss logs and checkpoints.
    pub run_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path).map_err(io_err(path))?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.codec.validate()?;
        self.faker.validate()?;
        if self.data.crop != self.faker.crop_size {
            return Err(LabError::Config(format!(
                "data.crop {} and faker.crop_size {} differ",
                self.data.crop, self.faker.crop_size
            )));
        }
        if let Some(m) = self.eval.metrics.iter().find(|m| !KNOWN_METRICS.contains(&m.as_str())) {
            return Err(LabError::Config(format!("unknown metric {m:?}")));
        }
        Ok(())
    }

    pub fn run_dir(&self) -> PathBuf {
        self.run_dir.clone().unwrap_or_else(|| self.data.out_dir.join("run"))
    }

    pub fn watermark_source(&self) -> Result<WatermarkSource> {
        let kind = self.codec.scheme.payload_kind();
        let crop = self.data.crop;
        Ok(match self.data.watermark.as_str() {
            "logo" => WatermarkSource::Fixed(synth::logo_for(crop, crop, kind)),
            "per-image" => WatermarkSource::PerImage,
            path => WatermarkSource::Fixed(io::load_payload(Path::new(path), kind)?),
        })
    }

    pub fn dataset_options(&self) -> Result<DatasetOptions> {
        let d = &self.data;
        Ok(DatasetOptions {
            corpus_dir: d.corpus_dir.clone(),
            out_dir: d.out_dir.clone(),
            codec: self.codec,
            watermark: self.watermark_source()?,
            crop: d.crop,
            seed: d.seed,
            val_ratio: d.val_ratio,
            test_ratio: d.test_ratio,
            limit: d.limit,
        })
    }
}

/// Loads a payload file, or the built-in logo when `path` is `"logo"`.
pub fn payload_arg(path: &str, height: usize, width: usize, kind: wmfaker_core::PayloadKind) -> Result<WatermarkPayload> {
    if path == "logo" {
        Ok(synth::logo_for(height, width, kind))
    } else {
        io::load_payload(Path::new(path), kind)
    }
}
