use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use wmfaker::config::{payload_arg, ExperimentConfig};
use wmfaker::data::{generate_dataset, PairedDataset};
use wmfaker::eval::{evaluate, write_grid};
use wmfaker::search::blind_transform_search;
use wmfaker::train::{train, FINAL_CHECKPOINT};
use wmfaker::{checkpoint, io, synth};
use wmfaker_core::codecs::{embed, extract, CodecConfig, Scheme};
use wmfaker_core::metrics::{ber, psnr};
use wmfaker_core::transforms::TransformKind;

#[derive(Parser)]
#[command(name = "wmfaker", version, about = "Forge and evaluate invisible image watermarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CodecArgs {
    #[arg(long, default_value = "lsb")]
    scheme: Scheme,
    #[arg(long, default_value_t = 1)]
    lsb_planes: u8,
    #[arg(long, default_value_t = 10.0)]
    strength: f64,
    #[arg(long, default_value_t = 0)]
    codec_seed: u64,
}

impl CodecArgs {
    fn config(&self) -> CodecConfig {
        CodecConfig { scheme: self.scheme, lsb_planes: self.lsb_planes, dct_strength: self.strength, rng_seed: self.codec_seed }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Embed a payload into a cover image
    Embed {
        #[command(flatten)]
        codec: CodecArgs,
        #[arg(long)]
        input: PathBuf,
        /// Payload PNG, or "logo" for the built-in logo
        #[arg(long, default_value = "logo")]
        watermark: String,
        #[arg(long)]
        output: PathBuf,
    },
    /// Extract the payload from a watermarked image
    Extract {
        #[command(flatten)]
        codec: CodecArgs,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Reference payload (PNG or "logo"); prints the bit error rate against it
        #[arg(long)]
        truth: Option<String>,
    },
    /// Write a procedural corpus of lossless images
    SynthCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 640)]
        count: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 1)]
        channels: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build a paired dataset from a corpus
    MakeDataset {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a faker on the dataset's train split
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        transform: Option<TransformKind>,
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        run_dir: Option<PathBuf>,
    },
    /// Probe-train every candidate representation and pick the best
    Search {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        probe_steps: Option<u64>,
        /// Where to write the JSON search report
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Evaluate a trained faker and write a report and comparison grid
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        grid: Option<PathBuf>,
    },
}

fn write_json(path: &PathBuf, value: &impl serde::Serialize) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Embed { codec, input, watermark, output } => {
            let cfg = codec.config();
            let cover = io::load_image(&input)?;
            let wm = payload_arg(&watermark, cover.height(), cover.width(), cfg.scheme.payload_kind())?;
            let marked = embed(&cover, &wm, &cfg)?;
            io::save_image(&output, &marked)?;
            println!("psnr_db {:.4}", psnr(&cover, &marked)?);
        }
        Command::Extract { codec, input, output, truth } => {
            let cfg = codec.config();
            let img = io::load_image(&input)?;
            let wm = extract(&img, &cfg)?;
            io::save_payload(&output, &wm)?;
            if let Some(t) = truth {
                let reference = payload_arg(&t, img.height(), img.width(), cfg.scheme.payload_kind())?;
                println!("ber {:.6}", ber(&wm, &reference)?);
            }
        }
        Command::SynthCorpus { out, count, size, channels, seed } => {
            if channels != 1 && channels != 3 {
                bail!("channels must be 1 or 3");
            }
            for i in 0..count {
                let img = synth::natural_image(size, channels, seed.wrapping_add(i as u64));
                io::save_image(&out.join(format!("img_{i:05}.png")), &img)?;
            }
            println!("wrote {count} images to {}", out.display());
        }
        Command::MakeDataset { config, corpus, out, seed } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.data.corpus_dir = corpus.unwrap_or(cfg.data.corpus_dir);
            cfg.data.out_dir = out.unwrap_or(cfg.data.out_dir);
            cfg.data.seed = seed.unwrap_or(cfg.data.seed);
            let ds = generate_dataset(&cfg.dataset_options()?)?;
            let s = &ds.manifest.splits;
            println!("{} pairs (train {}, val {}, test {}) in {}", ds.len(), s.train.len(), s.val.len(), s.test.len(), ds.root.display());
            for w in &ds.manifest.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Train { config, steps, transform, resume, run_dir } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.faker.steps = steps.unwrap_or(cfg.faker.steps);
            cfg.faker.transform = transform.unwrap_or(cfg.faker.transform);
            let dir = run_dir.unwrap_or_else(|| cfg.run_dir());
            let ds = PairedDataset::open(&cfg.data.out_dir)?;
            let out = train(&ds, &cfg.faker, &dir, resume.as_deref())?;
            println!("trained to step {}; checkpoint {}", out.faker.step, out.final_checkpoint.display());
        }
        Command::Search { config, probe_steps, report } => {
            let cfg = ExperimentConfig::load(&config)?;
            let ds = PairedDataset::open(&cfg.data.out_dir)?;
            let steps = probe_steps.unwrap_or(cfg.search.probe_steps);
            let result = blind_transform_search(&ds, &cfg.faker, steps, &cfg.search.candidates)?;
            for p in &result.probes {
                println!("{:<18} {:.6}", p.transform.to_string(), p.score);
            }
            println!("{}", result.chosen);
            write_json(&report.unwrap_or_else(|| cfg.run_dir().join("search.json")), &result)?;
        }
        Command::Eval { config, checkpoint: ckpt, report, grid } => {
            let cfg = ExperimentConfig::load(&config)?;
            let path = ckpt.unwrap_or_else(|| cfg.run_dir().join(FINAL_CHECKPOINT));
            if !path.exists() {
                bail!(wmfaker::LabError::Config(format!("checkpoint {} not found", path.display())));
            }
            let faker = checkpoint::load(&path)?;
            let ds = PairedDataset::open(&cfg.data.out_dir)?;
            let (result, rows) = evaluate(&faker, &ds, cfg.eval.split, cfg.eval.limit)?;
            for (name, block) in [
                ("image fake-vs-real", &result.image),
                ("watermark fake-vs-real", &result.watermark),
                ("watermark fake-vs-truth", &result.fake_vs_truth),
                ("watermark real-vs-truth", &result.real_vs_truth),
            ] {
                let a = block.aggregates.context("empty report")?;
                let mut line = format!("{name:<26}");
                for m in &cfg.eval.metrics {
                    match m.as_str() {
                        "psnr" => line += &format!(" psnr {:.3}", a.mean_psnr_db),
                        "ssim" => line += &format!(" ssim {:.4}", a.mean_ssim),
                        _ => {
                            if let Some(b) = a.mean_ber {
                                line += &format!(" ber {b:.4}");
                            }
                        }
                    }
                }
                println!("{line}");
            }
            write_json(&report.unwrap_or(cfg.eval.report.clone()), &result)?;
            let n = cfg.eval.grid_rows.min(rows.len());
            write_grid(&grid.unwrap_or(cfg.eval.grid.clone()), &rows[..n])?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
