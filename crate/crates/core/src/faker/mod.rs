//! The watermark faker: a conditional GAN that maps an original image (in
//! its preprocessed representation) to a fake watermarked one.

mod discriminator;
mod generator;
mod loss;
mod train;

pub use discriminator::{DiscTape, Discriminator, DiscriminatorSpec};
pub use generator::{GenTape, Generator, GeneratorSpec, OutputActivation};
pub use loss::{discriminator_loss, generator_loss, l1, lsgan_discriminator, lsgan_generator, GeneratorLoss};
pub use train::{rng_from_state, rng_state, Faker, PairedBatch, RngState, StepStats};

use serde::{Deserialize, Serialize};

use crate::error::{cfg_err, Result};
use crate::transforms::TransformKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub steps: u64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Weight of the L1 term in the generator objective.
    pub lambda_l1: f64,
    pub seed: u64,
    pub crop_size: usize,
    pub transform: TransformKind,
    /// 0 disables periodic checkpoints.
    pub checkpoint_every: u64,
    pub depth: usize,
    pub base_width: usize,
    pub max_width: usize,
    pub disc_base_width: usize,
    pub disc_stages: usize,
    pub dropout_levels: usize,
    pub dropout_p: f64,
    /// Keep dropout on when generating fakes after training.
    pub dropout_at_inference: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 3000,
            batch_size: 4,
            learning_rate: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            lambda_l1: 100.0,
            seed: 0,
            crop_size: 256,
            transform: TransformKind::SpatialBitplane,
            checkpoint_every: 500,
            depth: 6,
            base_width: 64,
            max_width: 512,
            disc_base_width: 64,
            disc_stages: 4,
            dropout_levels: 3,
            dropout_p: 0.5,
            dropout_at_inference: true,
        }
    }
}

impl TrainConfig {
    /// Desk-scale defaults: 64x64 crops with a depth-4 U-Net.
    /// 64x64 single-CPU scale: depth 4, narrow layers, dropout on the
    /// innermost level only, faster learning rate.
    pub fn desk() -> Self {
        Self {
            crop_size: 64,
            depth: 4,
            base_width: 16,
            disc_base_width: 16,
            dropout_levels: 1,
            learning_rate: 1e-3,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.crop_size == 0 || self.depth == 0 {
            return Err(cfg_err!("batch_size, crop_size and depth must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.lambda_l1 >= 0.0) {
            return Err(cfg_err!("learning_rate must be positive and lambda_l1 non-negative"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(cfg_err!("Adam betas must lie in [0, 1)"));
        }
        let m = 1usize << self.depth;
        if self.crop_size % m != 0 || self.crop_size % 8 != 0 {
            return Err(cfg_err!("crop_size {} must be divisible by 8 and by 2^depth = {m}", self.crop_size));
        }
        Ok(())
    }

    pub fn generator_spec(&self, image_channels: usize) -> GeneratorSpec {
        let c = self.transform.rep_channels(image_channels);
        GeneratorSpec {
            in_channels: c,
            out_channels: c,
            depth: self.depth,
            base_width: self.base_width,
            max_width: self.max_width,
            dropout_levels: self.dropout_levels,
            dropout_p: self.dropout_p,
            output: if self.transform.is_frequency() { OutputActivation::Linear } else { OutputActivation::Sigmoid },
            norm: true,
        }
    }

    pub fn discriminator_spec(&self, image_channels: usize) -> DiscriminatorSpec {
        DiscriminatorSpec {
            in_channels: self.transform.rep_channels(image_channels),
            stages: self.disc_stages,
            base_width: self.disc_base_width,
            max_width: self.max_width,
            norm: true,
        }
    }
}
