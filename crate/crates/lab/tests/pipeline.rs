use std::fs;
use std::path::Path;

use wmfaker::checkpoint;
use wmfaker::data::{generate_dataset, DatasetOptions, PairedDataset, Split, WatermarkSource};
use wmfaker::eval::{evaluate, write_grid, Forger};
use wmfaker::io::{load_image, save_image};
use wmfaker::search::blind_transform_search;
use wmfaker::train::{read_log, run_steps, train, FINAL_CHECKPOINT, LOSS_LOG};
use wmfaker::{synth, LabError, Result};
use wmfaker_core::codecs::{CodecConfig, Scheme};
use wmfaker_core::faker::{Faker, TrainConfig};
use wmfaker_core::transforms::TransformKind;
use wmfaker_core::CoverImage;

fn tiny_config(steps: u64) -> TrainConfig {
    TrainConfig {
        steps,
        batch_size: 2,
        crop_size: 32,
        depth: 3,
        base_width: 4,
        max_width: 16,
        disc_base_width: 4,
        disc_stages: 3,
        dropout_levels: 1,
        learning_rate: 1e-3,
        checkpoint_every: 3,
        seed: 11,
        ..TrainConfig::default()
    }
}

fn tiny_dataset(dir: &Path, scheme: Scheme) -> PairedDataset {
    let corpus = dir.join("corpus");
    for i in 0..12 {
        save_image(&corpus.join(format!("{i:02}.png")), &synth::natural_image(40, 1, i)).unwrap();
    }
    let wm = synth::logo_for(32, 32, scheme.payload_kind());
    let mut opts = DatasetOptions::new(&corpus, dir.join("ds"), CodecConfig::new(scheme), WatermarkSource::Fixed(wm));
    opts.crop = 32;
    opts.val_ratio = 0.25;
    opts.test_ratio = 0.25;
    generate_dataset(&opts).unwrap()
}

fn param_bytes(f: &Faker) -> Vec<u8> {
    checkpoint::to_bytes(f).unwrap()
}

#[test]
fn checkpoint_round_trips_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tiny_dataset(tmp.path(), Scheme::Lsb);
    let data = ds.preload(Split::Train, TransformKind::SpatialBitplane).unwrap();
    let mut f = Faker::new(tiny_config(4), 1).unwrap();
    run_steps(&mut f, &data, 2, |_, _| Ok(())).unwrap();
    let bytes = checkpoint::to_bytes(&f).unwrap();
    let g = checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(checkpoint::to_bytes(&g).unwrap(), bytes);
    assert_eq!(g.step, 2);
}

#[test]
fn resumed_training_continues_bit_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tiny_dataset(tmp.path(), Scheme::Lsb);
    let straight = train(&ds, &tiny_config(6), &tmp.path().join("a"), None).unwrap();

    let b = tmp.path().join("b");
    train(&ds, &tiny_config(6), &b, None).unwrap();
    // resume from the step-3 checkpoint over a log that already runs to step 6
    let resumed = train(&ds, &tiny_config(6), &b, Some(&b.join("step_000003.ckpt"))).unwrap();
    assert_eq!(param_bytes(&resumed.faker), param_bytes(&straight.faker));
    let log_a = fs::read(straight.log_path).unwrap();
    assert_eq!(fs::read(&resumed.log_path).unwrap(), log_a);
    let steps: Vec<u64> = read_log(&resumed.log_path).unwrap().iter().map(|s| s.step).collect();
    assert_eq!(steps, (0..6).collect::<Vec<_>>());
    assert!(b.join(FINAL_CHECKPOINT).exists() && b.join("step_000006.ckpt").exists());
}

#[test]
fn resume_extends_a_finished_run() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tiny_dataset(tmp.path(), Scheme::Lsb);
    let long = train(&ds, &tiny_config(5), &tmp.path().join("long"), None).unwrap();
    let dir = tmp.path().join("short");
    let short = train(&ds, &tiny_config(3), &dir, None).unwrap();
    let more = train(&ds, &tiny_config(5), &dir, Some(&short.final_checkpoint)).unwrap();
    assert_eq!(param_bytes(&more.faker), param_bytes(&long.faker));
    assert_eq!(fs::read(dir.join(LOSS_LOG)).unwrap(), fs::read(long.log_path).unwrap());
}

#[test]
fn resume_rejects_a_changed_config() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tiny_dataset(tmp.path(), Scheme::Lsb);
    let run = train(&ds, &tiny_config(2), &tmp.path().join("r"), None).unwrap();
    let changed = TrainConfig { learning_rate: 5e-4, ..tiny_config(4) };
    let err = train(&ds, &changed, &tmp.path().join("r"), Some(&run.final_checkpoint)).unwrap_err();
    assert!(matches!(err, LabError::Config(_)), "{err}");
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let f = Faker::new(tiny_config(1), 1).unwrap();
    let bytes = checkpoint::to_bytes(&f).unwrap();
    for bad in [&bytes[..bytes.len() - 4], &bytes[..20], b"not a checkpoint at all".as_slice()] {
        assert!(matches!(checkpoint::from_bytes(bad), Err(LabError::Checkpoint(_))));
    }
    let mut longer = bytes.clone();
    longer.push(0);
    assert!(matches!(checkpoint::from_bytes(&longer), Err(LabError::Checkpoint(_))));
    assert!(checkpoint::load(&tmp.path().join("missing.ckpt")).is_err());
}

struct Real<'a>(&'a PairedDataset);

impl Forger for Real<'_> {
    fn transform(&self) -> TransformKind {
        TransformKind::SpatialBitplane
    }

    fn forge(&self, original: &CoverImage) -> Result<CoverImage> {
        let i = (0..self.0.len()).find(|&i| self.0.load_pair(i).unwrap().0 == *original).unwrap();
        Ok(self.0.load_pair(i)?.1)
    }
}

#[test]
fn evaluating_the_real_watermarker_against_itself_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tiny_dataset(tmp.path(), Scheme::LsbMr);
    let (report, rows) = evaluate(&Real(&ds), &ds, Split::Test, None).unwrap();
    for block in [&report.watermark, &report.fake_vs_truth, &report.real_vs_truth] {
        let a = block.aggregates.unwrap();
        assert_eq!((a.mean_ber, a.mean_ssim, a.mean_psnr_db), (Some(0.0), 1.0, 100.0));
        assert!(block.is_consistent());
    }
    assert_eq!(report.image.aggregates.unwrap().mean_psnr_db, 100.0);
    let grid = tmp.path().join("grid.png");
    write_grid(&grid, &rows).unwrap();
    let img = load_image(&grid).unwrap();
    assert_eq!(img.shape(), (rows.len() * 34 + 2, 5 * 34 + 2, 3));
}

#[test]
fn trained_model_evaluates_and_search_reports_every_candidate() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tiny_dataset(tmp.path(), Scheme::BlockDct);
    let run = train(&ds, &TrainConfig { transform: TransformKind::BlockDct8, ..tiny_config(3) }, &tmp.path().join("r"), None).unwrap();
    let (report, _) = evaluate(&run.faker, &ds, Split::Test, Some(2)).unwrap();
    assert_eq!(report.image.per_pair.len(), 2);
    assert_eq!(report.transform, TransformKind::BlockDct8);
    let json = serde_json::to_string(&report).unwrap();
    assert_eq!(serde_json::from_str::<wmfaker::eval::EvalReport>(&json).unwrap(), report);

    let search = blind_transform_search(&ds, &tiny_config(0), 2, &TransformKind::SEARCH_CANDIDATES).unwrap();
    let kinds: Vec<_> = search.probes.iter().map(|p| p.transform).collect();
    assert_eq!(kinds, TransformKind::SEARCH_CANDIDATES);
    let best = search.probes.iter().map(|p| p.score).fold(f64::MIN, f64::max);
    let first_best = search.probes.iter().find(|p| p.score == best).unwrap().transform;
    assert_eq!(search.chosen, first_best);
}
