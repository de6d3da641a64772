//! Versioned checkpoint container.
//!
//! Layout: 8-byte magic, u32 LE format version, u64 LE header length, JSON
//! header, then every tensor as little-endian f32 in header order
//! (generator params, discriminator params, then Adam first and second
//! moments for each).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use wmfaker_core::faker::{rng_from_state, rng_state, Faker, RngState, TrainConfig};
use wmfaker_core::transforms::TransformKind;

use crate::error::{io_err, LabError, Result};

pub const MAGIC: &[u8; 8] = b"WMFAKER\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub config: TrainConfig,
    pub transform: TransformKind,
    pub image_channels: usize,
    pub step: u64,
    pub noise: RngState,
    pub adam_steps: [u64; 2],
    pub generator_sizes: Vec<usize>,
    pub discriminator_sizes: Vec<usize>,
}

fn sizes(params: &[&Vec<f32>]) -> Vec<usize> {
    params.iter().map(|p| p.len()).collect()
}

pub fn to_bytes(faker: &Faker) -> Result<Vec<u8>> {
    let gen = faker.generator.params();
    let disc = faker.discriminator.params();
    let header = CheckpointHeader {
        config: faker.config,
        transform: faker.transform(),
        image_channels: faker.image_channels,
        step: faker.step,
        noise: rng_state(&faker.noise),
        adam_steps: [faker.opt_g.t, faker.opt_d.t],
        generator_sizes: sizes(&gen),
        discriminator_sizes: sizes(&disc),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    let tensors = gen
        .into_iter()
        .chain(disc)
        .chain(&faker.opt_g.m)
        .chain(&faker.opt_g.v)
        .chain(&faker.opt_d.m)
        .chain(&faker.opt_d.v);
    for t in tensors {
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| LabError::Checkpoint("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(n * 4)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

fn fill(dst: Vec<&mut Vec<f32>>, sizes: &[usize], cur: &mut Cursor) -> Result<()> {
    if dst.len() != sizes.len() || dst.iter().zip(sizes).any(|(d, &s)| d.len() != s) {
        return Err(LabError::Checkpoint("tensor layout does not match the configured architecture".into()));
    }
    for (d, &s) in dst.into_iter().zip(sizes) {
        *d = cur.floats(s)?;
    }
    Ok(())
}

pub fn from_bytes(bytes: &[u8]) -> Result<Faker> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(8)? != MAGIC {
        return Err(LabError::Checkpoint("not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(cur.take(4)?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(LabError::Checkpoint(format!("format version {version} is not supported")));
    }
    let len = u64::from_le_bytes(cur.take(8)?.try_into().unwrap()) as usize;
    let header: CheckpointHeader = serde_json::from_slice(cur.take(len)?)?;
    if header.transform != header.config.transform {
        return Err(LabError::Checkpoint("transform disagrees with the config snapshot".into()));
    }
    let mut faker = Faker::new(header.config, header.image_channels)?;
    fill(faker.generator.params_mut(), &header.generator_sizes, &mut cur)?;
    fill(faker.discriminator.params_mut(), &header.discriminator_sizes, &mut cur)?;
    fill(faker.opt_g.m.iter_mut().collect(), &header.generator_sizes, &mut cur)?;
    fill(faker.opt_g.v.iter_mut().collect(), &header.generator_sizes, &mut cur)?;
    fill(faker.opt_d.m.iter_mut().collect(), &header.discriminator_sizes, &mut cur)?;
    fill(faker.opt_d.v.iter_mut().collect(), &header.discriminator_sizes, &mut cur)?;
    if cur.pos != bytes.len() {
        return Err(LabError::Checkpoint("trailing bytes after the last tensor".into()));
    }
    faker.step = header.step;
    faker.opt_g.t = header.adam_steps[0];
    faker.opt_d.t = header.adam_steps[1];
    faker.noise = rng_from_state(&header.noise);
    Ok(faker)
}

pub fn save(path: &Path, faker: &Faker) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, to_bytes(faker)?).map_err(io_err(path))
}

pub fn load(path: &Path) -> Result<Faker> {
    from_bytes(&fs::read(path).map_err(io_err(path))?)
}
