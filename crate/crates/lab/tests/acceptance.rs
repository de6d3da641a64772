//! End-to-end acceptance run: ten criteria, one PASS/FAIL line each.
//! Runs as a plain binary (no test harness) so the lines always show.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wmfaker::data::{generate_dataset, DatasetOptions, PairedDataset, Split, WatermarkSource};
use wmfaker::eval::{evaluate, EvalReport};
use wmfaker::io::save_image;
use wmfaker::search::blind_transform_search;
use wmfaker::synth;
use wmfaker::train::train;
use wmfaker_core::codecs::{embed, extract, CodecConfig, Scheme};
use wmfaker_core::faker::{
    discriminator_loss, generator_loss, l1, lsgan_discriminator, lsgan_generator, Discriminator, DiscriminatorSpec,
    Generator, GeneratorSpec, OutputActivation, TrainConfig,
};
use wmfaker_core::metrics::{ber, gaussian_taps, psnr, ssim};
use wmfaker_core::nn::Tensor;
use wmfaker_core::transforms::{from_frequency, pixel_compose, pixel_expand, to_frequency, decode, encode, TransformKind};
use wmfaker_core::{CoverImage, PayloadKind, WatermarkPayload};

const SIZE: usize = 64;
const CORPUS: usize = 640;
const STEPS: u64 = 3000;
const PROBE_STEPS: u64 = 300;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn random_image(rng: &mut ChaCha8Rng, channels: usize, lo: u8, hi: u8) -> CoverImage {
    CoverImage::from_fn(SIZE, SIZE, channels, |_, _, _| rng.random_range(lo..=hi)).unwrap()
}

fn random_payload(rng: &mut ChaCha8Rng, kind: PayloadKind) -> WatermarkPayload {
    let (h, w) = kind.shape_for(SIZE, SIZE);
    WatermarkPayload::from_fn(h, w, kind, |_, _| rng.random::<bool>())
}

fn natural_crop(seed: u64, channels: usize) -> CoverImage {
    synth::natural_image(SIZE + 16, channels, seed).center_crop(SIZE, SIZE).unwrap()
}

fn codec_round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut failures = 0;
    for i in 0..200 {
        let img = random_image(&mut rng, if i % 2 == 0 { 1 } else { 3 }, 1, 254);
        let wm = random_payload(&mut rng, PayloadKind::PerPixel);
        for scheme in [Scheme::Lsb, Scheme::LsbM, Scheme::LsbMr] {
            let cfg = CodecConfig { rng_seed: i, ..CodecConfig::new(scheme) };
            let back = extract(&embed(&img, &wm, &cfg).unwrap(), &cfg).unwrap();
            failures += usize::from(back != wm);
        }
    }
    outcome(failures == 0, format!("{failures} of 600 round trips differ"))
}

fn dct_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = CodecConfig::new(Scheme::BlockDct);
    let (mut total_ber, mut total_psnr) = (0.0, 0.0);
    for i in 0..100 {
        let img = natural_crop(10_000 + i, 1);
        let wm = random_payload(&mut rng, PayloadKind::PerBlock);
        let marked = embed(&img, &wm, &cfg).unwrap();
        total_ber += ber(&extract(&marked, &cfg).unwrap(), &wm).unwrap();
        total_psnr += psnr(&img, &marked).unwrap();
    }
    let (b, p) = (total_ber / 100.0, total_psnr / 100.0);
    outcome(b <= 0.05 && p >= 30.0, format!("mean BER {b:.4}, mean PSNR {p:.2} dB"))
}

fn transform_invertibility() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let kinds = [TransformKind::BlockDct8, TransformKind::FullframeDct, TransformKind::HaarDwtL1];
    let mut failures = 0;
    for i in 0..100 {
        let img = random_image(&mut rng, if i % 2 == 0 { 1 } else { 3 }, 0, 255);
        failures += usize::from(pixel_compose(&pixel_expand(&img)).unwrap() != img);
        for kind in kinds {
            failures += usize::from(from_frequency(&to_frequency(&img, kind).unwrap()).unwrap() != img);
        }
        let raw = TransformKind::RawPixel;
        failures += usize::from(decode(&encode(&img, raw).unwrap(), SIZE, SIZE, img.channels(), raw).unwrap() != img);
    }
    outcome(failures == 0, format!("{failures} of 500 round trips differ"))
}

/// Direct 2-D windowed SSIM, written independently of the separable version.
fn reference_ssim(a: &CoverImage, b: &CoverImage) -> f64 {
    let g = gaussian_taps();
    let n = g.len();
    let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));
    let mut per_channel = 0.0;
    for c in 0..a.channels() {
        let (mut sum, mut count) = (0.0, 0usize);
        for y0 in 0..=a.height() - n {
            for x0 in 0..=a.width() - n {
                let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        let w = g[i] * g[j];
                        let (pa, pb) = (a.get(y0 + i, x0 + j, c) as f64, b.get(y0 + i, x0 + j, c) as f64);
                        ma += w * pa;
                        mb += w * pb;
                        saa += w * pa * pa;
                        sbb += w * pb * pb;
                        sab += w * pa * pb;
                    }
                }
                let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
                sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                count += 1;
            }
        }
        per_channel += sum / count as f64;
    }
    per_channel / a.channels() as f64
}

fn metric_correctness() -> Outcome {
    let base = CoverImage::filled(SIZE, SIZE, 1, 100).unwrap();
    let shifted = CoverImage::filled(SIZE, SIZE, 1, 101).unwrap();
    let offset_db = psnr(&base, &shifted).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut self_one = true;
    for i in 0..20 {
        let ch = if i % 4 == 3 { 3 } else { 1 };
        let a = natural_crop(20_000 + i, ch);
        let b = CoverImage::from_fn(SIZE, SIZE, ch, |y, x, c| {
            (a.get(y, x, c) as i32 + rng.random_range(-20..=20)).clamp(0, 255) as u8
        })
        .unwrap();
        worst = worst.max((ssim(&a, &b).unwrap() - reference_ssim(&a, &b)).abs());
        self_one &= ssim(&a, &a).unwrap() == 1.0;
    }
    let pass = (offset_db - 48.1308).abs() <= 1e-3 && self_one && worst <= 1e-6;
    outcome(pass, format!("offset PSNR {offset_db:.4} dB, ssim(I,I)==1: {self_one}, max |ssim - reference| {worst:.2e}"))
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: [usize; 4]) -> Tensor<f64> {
    let [n, c, h, w] = shape;
    Tensor::from_vec(n, c, h, w, (0..n * c * h * w).map(|_| rng.random::<f64>()).collect())
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-9 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

// Piecewise-linear layers put kinks near any single step, and tiny steps
// drown in round-off, so each entry gets the best of a few step sizes.
const STEPS_FD: [f64; 3] = [1e-5, 1e-6, 1e-7];

#[derive(Default)]
struct Ladder {
    entries: usize,
    worst: f64,
    perturbed_accepted: usize,
}

impl Ladder {
    fn check(&mut self, analytic: f64, loss: &mut impl FnMut(f64) -> f64, at: f64) {
        let (mut best, mut best_off) = (f64::INFINITY, f64::INFINITY);
        for h in STEPS_FD {
            let numeric = (loss(at + h) - loss(at - h)) / (2.0 * h);
            best = best.min(relative_error(analytic, numeric));
            best_off = best_off.min(relative_error(analytic * 1.01, numeric));
        }
        loss(at);
        self.entries += 1;
        self.worst = self.worst.max(best);
        self.perturbed_accepted += (best_off <= 1e-3) as usize;
    }
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let gspec = GeneratorSpec {
        in_channels: 2,
        out_channels: 2,
        depth: 2,
        base_width: 2,
        max_width: 4,
        dropout_levels: 1,
        dropout_p: 0.5,
        output: OutputActivation::Sigmoid,
        norm: true,
    };
    let dspec = DiscriminatorSpec { in_channels: 2, stages: 4, base_width: 1, max_width: 2, norm: true };
    let mut g = Generator::<f64>::new(gspec, &mut rng).unwrap();
    let mut d = Discriminator::<f64>::new(dspec, &mut rng).unwrap();
    let params = g.param_count() + d.param_count();
    let shape = [2, 2, 48, 48];
    let (x, y, other) = (random_tensor(&mut rng, shape), random_tensor(&mut rng, shape), random_tensor(&mut rng, shape));
    let lambda = 100.0;
    let noise = || ChaCha8Rng::seed_from_u64(6);

    // generator: adversarial + L1 through the discriminator
    let (fake, tape) = g.forward(&x, Some(&mut noise())).unwrap();
    let (logits, dtape) = d.forward(&x, &fake).unwrap();
    let mut gout = d.backward(&dtape, &lsgan_generator(&logits).1, None, true).unwrap();
    gout.data.iter_mut().zip(&l1(&y, &fake).unwrap().1.data).for_each(|(a, b)| *a += lambda * b);
    let mut ggrads = g.zero_grads();
    g.backward(&tape, &gout, &mut ggrads);
    let mut ladder = Ladder::default();
    for (pi, grad) in ggrads.iter().enumerate() {
        for (j, &analytic) in grad.iter().enumerate() {
            let orig = g.params()[pi][j];
            let mut eval = |v: f64| {
                g.params_mut()[pi][j] = v;
                let fake = g.forward(&x, Some(&mut noise())).unwrap().0;
                generator_loss(&d, &x, &y, &fake, lambda).unwrap().total
            };
            ladder.check(analytic, &mut eval, orig);
        }
    }

    // discriminator: real and fake terms, candidate held fixed
    let (rl, rt) = d.forward(&x, &y).unwrap();
    let (fl, ft) = d.forward(&x, &other).unwrap();
    let (_, gr, gf) = lsgan_discriminator(&rl, &fl);
    let mut dgrads = d.zero_grads();
    d.backward(&rt, &gr, Some(&mut dgrads), false);
    d.backward(&ft, &gf, Some(&mut dgrads), false);
    for (pi, grad) in dgrads.iter().enumerate() {
        for (j, &analytic) in grad.iter().enumerate() {
            let orig = d.params()[pi][j];
            let mut eval = |v: f64| {
                d.params_mut()[pi][j] = v;
                discriminator_loss(&d, &x, &y, &other).unwrap()
            };
            ladder.check(analytic, &mut eval, orig);
        }
    }
    let Ladder { entries, worst, perturbed_accepted } = ladder;
    // the same tolerance must reject a 1% error almost everywhere
    let pass = entries == params && worst <= 1e-3 && perturbed_accepted * 10 < entries;
    outcome(
        pass,
        format!("{entries} parameters, max relative error {worst:.2e}, 1%-perturbed gradients accepted {perturbed_accepted}"),
    )
}

struct Fixtures {
    root: PathBuf,
    lsb: PairedDataset,
    dct: PairedDataset,
    lsb_pe: Option<EvalReport>,
}

fn build_dataset(root: &Path, corpus: &Path, scheme: Scheme) -> PairedDataset {
    let logo = synth::logo_for(SIZE, SIZE, scheme.payload_kind());
    let mut opts = DatasetOptions::new(corpus, root.join(format!("{scheme:?}")), CodecConfig::new(scheme), WatermarkSource::Fixed(logo));
    opts.crop = SIZE;
    let ds = generate_dataset(&opts).unwrap();
    assert_eq!(ds.split(Split::Train).len(), 512);
    assert_eq!(ds.split(Split::Test).len(), 64);
    ds
}

fn fixtures() -> Fixtures {
    let root = std::env::temp_dir().join(format!("wmfaker-acceptance-{}", std::process::id()));
    let corpus = root.join("corpus");
    for i in 0..CORPUS {
        save_image(&corpus.join(format!("img_{i:04}.png")), &synth::natural_image(SIZE, 1, i as u64)).unwrap();
    }
    let lsb = build_dataset(&root, &corpus, Scheme::Lsb);
    let dct = build_dataset(&root, &corpus, Scheme::BlockDct);
    Fixtures { root, lsb, dct, lsb_pe: None }
}

fn desk(transform: TransformKind) -> TrainConfig {
    TrainConfig { steps: STEPS, transform, seed: 7, ..TrainConfig::desk() }
}

fn train_and_eval(ds: &PairedDataset, transform: TransformKind, dir: &Path) -> EvalReport {
    let run = train(ds, &desk(transform), dir, None).unwrap();
    evaluate(&run.faker, ds, Split::Test, None).unwrap().0
}

fn lsb_forgery(fx: &mut Fixtures) -> Outcome {
    let report = train_and_eval(&fx.lsb, TransformKind::SpatialBitplane, &fx.root.join("run_lsb_a"));
    let (w, im) = (report.watermark.aggregates.unwrap(), report.image.aggregates.unwrap());
    let b = w.mean_ber.unwrap();
    let pass = w.mean_ssim >= 0.8 && b <= 0.05 && im.mean_psnr_db >= 25.0;
    fx.lsb_pe = Some(report);
    outcome(pass, format!("watermark SSIM {:.4}, BER {b:.4}, image PSNR {:.2} dB", w.mean_ssim, im.mean_psnr_db))
}

fn pe_ablation(fx: &mut Fixtures) -> Outcome {
    let raw = train_and_eval(&fx.lsb, TransformKind::RawPixel, &fx.root.join("run_lsb_raw"));
    let without = raw.watermark.aggregates.unwrap().mean_ssim;
    let with = fx.lsb_pe.as_ref().map_or(f64::NAN, |r| r.watermark.aggregates.unwrap().mean_ssim);
    outcome(without <= 0.1 && with >= 0.8, format!("watermark SSIM without expansion {without:.4}, with {with:.4}"))
}

fn frequency_branch(fx: &mut Fixtures) -> Outcome {
    let freq = train_and_eval(&fx.dct, TransformKind::BlockDct8, &fx.root.join("run_dct_freq"));
    let spatial = train_and_eval(&fx.dct, TransformKind::SpatialBitplane, &fx.root.join("run_dct_spatial"));
    let f = freq.fake_vs_truth.aggregates.unwrap().mean_ssim;
    let s = spatial.fake_vs_truth.aggregates.unwrap().mean_ssim;
    outcome(f > s && f > 0.2, format!("fake-vs-truth watermark SSIM: frequency {f:.4}, spatial {s:.4}"))
}

fn blind_search(fx: &mut Fixtures) -> Outcome {
    let base = desk(TransformKind::SpatialBitplane);
    let candidates = TransformKind::SEARCH_CANDIDATES;
    let lsb = blind_transform_search(&fx.lsb, &base, PROBE_STEPS, &candidates).unwrap();
    let dct = blind_transform_search(&fx.dct, &base, PROBE_STEPS, &candidates).unwrap();
    let scores = |r: &wmfaker::search::SearchReport| {
        r.probes.iter().map(|p| format!("{}={:.3}", p.transform, p.score)).collect::<Vec<_>>().join(" ")
    };
    let pass = lsb.chosen == TransformKind::SpatialBitplane && dct.chosen == TransformKind::BlockDct8;
    outcome(pass, format!("LSB -> {} [{}]; DCT -> {} [{}]", lsb.chosen, scores(&lsb), dct.chosen, scores(&dct)))
}

fn determinism(fx: &mut Fixtures) -> Outcome {
    let again = train_and_eval(&fx.lsb, TransformKind::SpatialBitplane, &fx.root.join("run_lsb_b"));
    let log = |d: &str| std::fs::read(fx.root.join(d).join(wmfaker::train::LOSS_LOG)).unwrap();
    let same_log = log("run_lsb_a") == log("run_lsb_b");
    let same_report = fx.lsb_pe.as_ref().is_some_and(|r| {
        serde_json::to_vec(r).unwrap() == serde_json::to_vec(&again).unwrap()
    });
    outcome(same_log && same_report, format!("loss logs identical: {same_log}, reports identical: {same_report}"))
}

type Criterion = (&'static str, Option<f64>, fn(&mut Fixtures) -> Outcome);

fn main() -> ExitCode {
    let started = Instant::now();
    let criteria: [Criterion; 10] = [
        ("codec round-trips", Some(10.0), |_| codec_round_trips()),
        ("DCT codec fidelity", Some(30.0), |_| dct_fidelity()),
        ("transform invertibility", Some(10.0), |_| transform_invertibility()),
        ("metric correctness", None, |_| metric_correctness()),
        ("gradient check", Some(60.0), |_| gradient_check()),
        ("desk-scale LSB forgery", Some(7200.0), lsb_forgery),
        ("pixel-expansion ablation", Some(7200.0), pe_ablation),
        ("frequency branch beats spatial on DCT", None, frequency_branch),
        ("blind transform search", None, blind_search),
        ("training determinism", Some(7200.0), determinism),
    ];
    let mut fx = fixtures();
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(|| run(&mut fx)))
            .unwrap_or_else(|e| {
                let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
                outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
            });
        let secs = t.elapsed().as_secs_f64();
        let in_time = budget.is_none_or(|b| secs < b);
        let pass = result.pass && in_time;
        failed += usize::from(!pass);
        let budget_note = if in_time { String::new() } else { format!(" over the {}s budget", budget.unwrap()) };
        println!(
            "[{}] {:>2}. {name}: {} ({secs:.1}s{budget_note})",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            result.detail
        );
    }
    let _ = std::fs::remove_dir_all(&fx.root);
    println!("acceptance: {} of 10 passed in {:.0}s", 10 - failed, started.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
