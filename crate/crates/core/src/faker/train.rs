use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{l1, lsgan_discriminator, lsgan_generator};
use super::{Discriminator, Generator, TrainConfig};
use crate::error::{cfg_err, dim_err, Error, Result};
use crate::image::CoverImage;
use crate::nn::{Adam, Tensor};
use crate::transforms::{decode, encode, TransformKind};

// Independent streams drawn from the one training seed.
const STREAM_INIT: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_INFERENCE: u64 = 3;

fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Exact position of a ChaCha stream, enough to resume it bit-identically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

pub fn rng_state(rng: &ChaCha8Rng) -> RngState {
    RngState { seed: rng.get_seed(), stream: rng.get_stream(), word_pos: rng.get_word_pos() }
}

pub fn rng_from_state(state: &RngState) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(state.seed);
    rng.set_stream(state.stream);
    rng.set_word_pos(state.word_pos);
    rng
}

/// Preprocessed originals and targets, both in the model representation.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedBatch {
    pub input: Tensor<f32>,
    pub target: Tensor<f32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub step: u64,
    pub d_loss: f32,
    pub g_adv: f32,
    pub g_l1: f32,
    pub g_loss: f32,
}

/// Generator, discriminator, their optimizers and the dropout noise stream.
#[derive(Debug, Clone)]
pub struct Faker {
    pub config: TrainConfig,
    pub image_channels: usize,
    pub generator: Generator<f32>,
    pub discriminator: Discriminator<f32>,
    pub opt_g: Adam<f32>,
    pub opt_d: Adam<f32>,
    /// Completed optimization steps.
    pub step: u64,
    pub noise: ChaCha8Rng,
}

fn sizes(params: &[&Vec<f32>]) -> Vec<usize> {
    params.iter().map(|p| p.len()).collect()
}

impl Faker {
    pub fn new(config: TrainConfig, image_channels: usize) -> Result<Self> {
        config.validate()?;
        let mut init = seeded(config.seed, STREAM_INIT);
        let generator = Generator::new(config.generator_spec(image_channels), &mut init)?;
        let discriminator = Discriminator::new(config.discriminator_spec(image_channels), &mut init)?;
        let opt_g = Adam::new(&sizes(&generator.params()), config.learning_rate, config.beta1, config.beta2);
        let opt_d = Adam::new(&sizes(&discriminator.params()), config.learning_rate, config.beta1, config.beta2);
        Ok(Self {
            config,
            image_channels,
            generator,
            discriminator,
            opt_g,
            opt_d,
            step: 0,
            noise: seeded(config.seed, STREAM_NOISE),
        })
    }

    pub fn transform(&self) -> TransformKind {
        self.config.transform
    }

    /// One discriminator update followed by one generator update.
    pub fn train_step(&mut self, batch: &PairedBatch) -> Result<StepStats> {
        if batch.input.shape() != batch.target.shape() {
            return Err(dim_err!("batch input {:?} vs target {:?}", batch.input.shape(), batch.target.shape()));
        }
        let step = self.step;
        let (fake, g_tape) = self.generator.forward(&batch.input, Some(&mut self.noise))?;

        // discriminator: real and fake pairs, fake held constant
        let mut d_grads = self.discriminator.zero_grads();
        let (real_logits, real_tape) = self.discriminator.forward(&batch.input, &batch.target)?;
        let (fake_logits, fake_tape) = self.discriminator.forward(&batch.input, &fake)?;
        let (d_loss, g_real, g_fake) = lsgan_discriminator(&real_logits, &fake_logits);
        if !d_loss.is_finite() {
            return Err(Error::Divergence { step, what: "discriminator loss" });
        }
        self.discriminator.backward(&real_tape, &g_real, Some(&mut d_grads), false);
        self.discriminator.backward(&fake_tape, &g_fake, Some(&mut d_grads), false);
        self.opt_d.step(self.discriminator.params_mut(), &d_grads);

        // generator: fool the updated discriminator and stay close in L1
        let (logits, tape) = self.discriminator.forward(&batch.input, &fake)?;
        let (g_adv, g_logits) = lsgan_generator(&logits);
        let (g_l1, g_l1_grad) = l1(&batch.target, &fake)?;
        let lambda = self.config.lambda_l1 as f32;
        let g_loss = g_adv + lambda * g_l1;
        if !g_loss.is_finite() {
            return Err(Error::Divergence { step, what: "generator loss" });
        }
        let mut g_out = self.discriminator.backward(&tape, &g_logits, None, true).expect("input grad");
        g_out.data.iter_mut().zip(&g_l1_grad.data).for_each(|(g, &l)| *g += lambda * l);
        let mut g_grads = self.generator.zero_grads();
        self.generator.backward(&g_tape, &g_out, &mut g_grads);
        self.opt_g.step(self.generator.params_mut(), &g_grads);

        self.step += 1;
        Ok(StepStats { step, d_loss, g_adv, g_l1, g_loss })
    }

    /// Generator output for a batch; dropout noise is drawn from `noise`
    /// unless it is `None`.
    pub fn generate(&self, input: &Tensor<f32>, noise: Option<&mut ChaCha8Rng>) -> Result<Tensor<f32>> {
        Ok(self.generator.forward(input, noise)?.0)
    }

    /// Preprocess, generate, postprocess. With dropout at inference enabled,
    /// the noise stream restarts from the training seed on every call.
    pub fn fake_watermark(&self, original: &CoverImage, transform: TransformKind) -> Result<CoverImage> {
        if transform != self.config.transform {
            return Err(cfg_err!("model was trained for {}, asked for {transform}", self.config.transform));
        }
        if original.channels() != self.image_channels {
            return Err(dim_err!("model expects {} channels, got {}", self.image_channels, original.channels()));
        }
        let (h, w, c) = original.shape();
        let rep = encode(original, transform)?;
        let input = Tensor::from_vec(1, transform.rep_channels(c), h, w, rep);
        let mut rng = seeded(self.config.seed, STREAM_INFERENCE);
        let noise = self.config.dropout_at_inference.then_some(&mut rng);
        let out = self.generate(&input, noise)?;
        decode(&out.data, h, w, c, transform)
    }
}
