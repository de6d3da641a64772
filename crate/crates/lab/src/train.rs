//! Training runs with a loss log and periodic checkpoints.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::info;
use wmfaker_core::faker::{Faker, StepStats, TrainConfig};

use crate::checkpoint;
use crate::data::{batch_positions, PairedDataset, Preloaded, Split};
use crate::error::{io_err, LabError, Result};

pub const LOSS_LOG: &str = "losses.csv";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";
const LOG_HEADER: &str = "step,d_loss,g_adv,g_l1,g_loss";

pub fn checkpoint_name(step: u64) -> String {
    format!("step_{step:06}.ckpt")
}

/// One loss-log line. `f32` display is the shortest exact round trip.
pub fn log_line(s: &StepStats) -> String {
    format!("{},{},{},{},{}", s.step, s.d_loss, s.g_adv, s.g_l1, s.g_loss)
}

/// Runs `faker` forward until it has taken `until` steps in total, drawing
/// batches from `data` by step index. `on_step` sees every step's stats.
pub fn run_steps(
    faker: &mut Faker,
    data: &Preloaded,
    until: u64,
    mut on_step: impl FnMut(&Faker, &StepStats) -> Result<()>,
) -> Result<()> {
    if data.is_empty() {
        return Err(LabError::Data("training split is empty".into()));
    }
    let (seed, batch) = (faker.config.seed, faker.config.batch_size);
    while faker.step < until {
        let positions = batch_positions(seed, faker.step, batch, data.len());
        let stats = faker.train_step(&data.batch(&positions))?;
        on_step(faker, &stats)?;
    }
    Ok(())
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub faker: Faker,
    pub log_path: PathBuf,
    pub final_checkpoint: PathBuf,
}

/// Trains on the dataset's train split for `config.steps` total steps,
/// writing `losses.csv`, `step_NNNNNN.ckpt` every `checkpoint_every` steps and
/// `final.ckpt`. With `resume`, training continues from that checkpoint and
/// the log is cut back to the checkpoint's step before appending.
pub fn train(dataset: &PairedDataset, config: &TrainConfig, out_dir: &Path, resume: Option<&Path>) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.manifest.crop != config.crop_size {
        return Err(LabError::Config(format!(
            "dataset crop {} differs from crop_size {}",
            dataset.manifest.crop, config.crop_size
        )));
    }
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let log_path = out_dir.join(LOSS_LOG);
    let mut faker = match resume {
        Some(path) => {
            let mut f = checkpoint::load(path)?;
            if f.image_channels != dataset.channels() {
                return Err(LabError::Config("checkpoint channel count differs from the dataset".into()));
            }
            // only the run length may change on resume
            if (TrainConfig { steps: f.config.steps, ..*config }) != f.config {
                return Err(LabError::Config("resume config differs from the checkpoint".into()));
            }
            f.config.steps = config.steps;
            f
        }
        None => Faker::new(*config, dataset.channels())?,
    };

    let mut kept = vec![LOG_HEADER.to_string()];
    if resume.is_some() && log_path.exists() {
        let text = fs::read_to_string(&log_path).map_err(io_err(&log_path))?;
        kept.extend(
            text.lines()
                .skip(1)
                .filter(|l| l.split(',').next().and_then(|s| s.parse::<u64>().ok()).is_some_and(|s| s < faker.step))
                .map(str::to_string),
        );
    }
    let mut log = fs::File::create(&log_path).map_err(io_err(&log_path))?;
    writeln!(log, "{}", kept.join("\n")).map_err(io_err(&log_path))?;

    let data = dataset.preload(Split::Train, config.transform)?;
    info!("training {} pairs from step {} to {}", data.len(), faker.step, config.steps);
    let every = config.checkpoint_every;
    run_steps(&mut faker, &data, config.steps, |f, s| {
        writeln!(log, "{}", log_line(s)).map_err(io_err(&log_path))?;
        if (s.step + 1) % 100 == 0 {
            info!("step {} d {:.4} g_adv {:.4} l1 {:.5}", s.step + 1, s.d_loss, s.g_adv, s.g_l1);
        }
        if every > 0 && f.step % every == 0 {
            checkpoint::save(&out_dir.join(checkpoint_name(f.step)), f)?;
        }
        Ok(())
    })?;
    log.flush().map_err(io_err(&log_path))?;
    let final_checkpoint = out_dir.join(FINAL_CHECKPOINT);
    checkpoint::save(&final_checkpoint, &faker)?;
    Ok(TrainOutcome { faker, log_path, final_checkpoint })
}

/// Parses a loss log back into stats.
pub fn read_log(path: &Path) -> Result<Vec<StepStats>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let bad = || LabError::Data(format!("malformed loss log line {l:?}"));
            if f.len() != 5 {
                return Err(bad());
            }
            let num = |i: usize| f[i].parse::<f32>().map_err(|_| bad());
            Ok(StepStats {
                step: f[0].parse().map_err(|_| bad())?,
                d_loss: num(1)?,
                g_adv: num(2)?,
                g_l1: num(3)?,
                g_loss: num(4)?,
            })
        })
        .collect()
}
