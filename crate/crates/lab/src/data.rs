//! Paired (original, watermarked) datasets on disk with a JSON manifest.

use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use wmfaker_core::codecs::{embed, CodecConfig};
use wmfaker_core::faker::PairedBatch;
use wmfaker_core::nn::Tensor;
use wmfaker_core::transforms::{encode, TransformKind};
use wmfaker_core::{CoverImage, PayloadKind, WatermarkPayload};

use crate::error::{io_err, LabError, Result};
use crate::io::{encode_png, file_sha256, is_lossy, is_supported, load_image, save_payload, sha256_hex};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;
const LOGO_FILE: &str = "watermark.png";

/// Where each pair's payload comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum WatermarkSource {
    /// One payload for every image.
    Fixed(WatermarkPayload),
    /// Content-derived: block means of channel 0 thresholded at the image mean.
    PerImage,
}

/// Content-derived payload for `img`.
pub fn per_image_payload(img: &CoverImage, kind: PayloadKind) -> WatermarkPayload {
    let (h, w) = (img.height(), img.width());
    let (bh, bw) = (h / 8, w / 8);
    let mut means = vec![0.0; bh * bw];
    for by in 0..bh {
        for bx in 0..bw {
            let mut s = 0u32;
            for y in 0..8 {
                for x in 0..8 {
                    s += img.get(by * 8 + y, bx * 8 + x, 0) as u32;
                }
            }
            means[by * bw + bx] = s as f64 / 64.0;
        }
    }
    let global = means.iter().sum::<f64>() / means.len().max(1) as f64;
    match kind {
        PayloadKind::PerBlock => WatermarkPayload::from_fn(bh, bw, kind, |y, x| means[y * bw + x] > global),
        PayloadKind::PerPixel => WatermarkPayload::from_fn(h, w, kind, |y, x| means[(y / 8) * bw + x / 8] > global),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum WatermarkRef {
    Fixed { path: String, sha256: String },
    PerImage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSample {
    pub id: String,
    pub source: String,
    pub original_path: String,
    pub watermarked_path: String,
    pub original_sha256: String,
    pub watermarked_sha256: String,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub crop: usize,
    pub val_ratio: f64,
    pub test_ratio: f64,
    pub codec: CodecConfig,
    pub watermark: WatermarkRef,
    pub samples: Vec<PairedSample>,
    pub splits: Splits,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct DatasetOptions {
    pub corpus_dir: PathBuf,
    pub out_dir: PathBuf,
    pub codec: CodecConfig,
    pub watermark: WatermarkSource,
    pub crop: usize,
    pub seed: u64,
    pub val_ratio: f64,
    pub test_ratio: f64,
    /// Use at most this many corpus images (in sorted order).
    pub limit: Option<usize>,
}

impl DatasetOptions {
    pub fn new(corpus_dir: impl Into<PathBuf>, out_dir: impl Into<PathBuf>, codec: CodecConfig, watermark: WatermarkSource) -> Self {
        Self {
            corpus_dir: corpus_dir.into(),
            out_dir: out_dir.into(),
            codec,
            watermark,
            crop: 64,
            seed: 0,
            val_ratio: 0.1,
            test_ratio: 0.1,
            limit: None,
        }
    }
}

/// Deterministic disjoint split of `0..n`; test first, then val, the rest train.
pub fn make_splits(n: usize, val_ratio: f64, test_ratio: f64, seed: u64) -> Splits {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = ((n as f64 * test_ratio).round() as usize).min(n);
    let n_val = ((n as f64 * val_ratio).round() as usize).min(n - n_test);
    let mut test = order[..n_test].to_vec();
    let mut val = order[n_test..n_test + n_val].to_vec();
    let mut train = order[n_test + n_val..].to_vec();
    test.sort_unstable();
    val.sort_unstable();
    train.sort_unstable();
    Splits { train, val, test }
}

fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    Ok(files)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}

/// Center-crops, watermarks and writes every usable corpus image, then
/// writes the manifest. Undersized or unreadable files are skipped with a
/// warning; a lossy file is an error.
pub fn generate_dataset(opts: &DatasetOptions) -> Result<PairedDataset> {
    if opts.crop == 0 || opts.crop % 8 != 0 {
        return Err(LabError::Config(format!("crop {} must be a positive multiple of 8", opts.crop)));
    }
    if !(0.0..=1.0).contains(&opts.val_ratio) || !(0.0..=1.0).contains(&opts.test_ratio) || opts.val_ratio + opts.test_ratio > 1.0 {
        return Err(LabError::Config("split ratios must lie in [0, 1] and sum to at most 1".into()));
    }
    opts.codec.validate()?;
    let kind = opts.codec.scheme.payload_kind();
    if let WatermarkSource::Fixed(wm) = &opts.watermark {
        if wm.kind() != kind {
            return Err(LabError::Config(format!("watermark is {:?}, scheme needs {kind:?}", wm.kind())));
        }
        wm.ensure_fits(opts.crop, opts.crop)?;
    }

    let mut warnings = Vec::new();
    let mut samples = Vec::new();
    let mut files = corpus_files(&opts.corpus_dir)?;
    if let Some(lossy) = files.iter().find(|p| is_lossy(p)) {
        return Err(LabError::Format(format!("{}: lossy source images are not accepted", lossy.display())));
    }
    files.retain(|p| is_supported(p));
    for path in files {
        if opts.limit.is_some_and(|n| samples.len() >= n) {
            break;
        }
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let img = match load_image(&path) {
            Ok(img) => img,
            Err(e) => {
                let msg = format!("skipped {name}: {e}");
                warn!("{msg}");
                warnings.push(msg);
                continue;
            }
        };
        if img.height() < opts.crop || img.width() < opts.crop {
            let msg = format!("skipped {name}: {}x{} is smaller than crop {}", img.height(), img.width(), opts.crop);
            warn!("{msg}");
            warnings.push(msg);
            continue;
        }
        let original = img.center_crop(opts.crop, opts.crop)?;
        let wm = match &opts.watermark {
            WatermarkSource::Fixed(wm) => wm.clone(),
            WatermarkSource::PerImage => per_image_payload(&original, kind),
        };
        let marked = embed(&original, &wm, &opts.codec)?;
        let id = format!("{:06}", samples.len());
        let original_path = format!("originals/{id}.png");
        let watermarked_path = format!("watermarked/{id}.png");
        let (a, b) = (encode_png(&original)?, encode_png(&marked)?);
        write_file(&opts.out_dir.join(&original_path), &a)?;
        write_file(&opts.out_dir.join(&watermarked_path), &b)?;
        samples.push(PairedSample {
            id,
            source: name,
            original_path,
            watermarked_path,
            original_sha256: sha256_hex(&a),
            watermarked_sha256: sha256_hex(&b),
            height: opts.crop,
            width: opts.crop,
            channels: original.channels(),
        });
    }
    if samples.is_empty() {
        return Err(LabError::Data(format!("no usable images in {}", opts.corpus_dir.display())));
    }

    let watermark = match &opts.watermark {
        WatermarkSource::Fixed(wm) => {
            let path = opts.out_dir.join(LOGO_FILE);
            save_payload(&path, wm)?;
            WatermarkRef::Fixed { path: LOGO_FILE.into(), sha256: file_sha256(&path)? }
        }
        WatermarkSource::PerImage => WatermarkRef::PerImage,
    };
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        seed: opts.seed,
        crop: opts.crop,
        val_ratio: opts.val_ratio,
        test_ratio: opts.test_ratio,
        codec: opts.codec,
        watermark,
        splits: make_splits(samples.len(), opts.val_ratio, opts.test_ratio, opts.seed),
        samples,
        warnings,
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    write_file(&opts.out_dir.join(MANIFEST_FILE), text.as_bytes())?;
    Ok(PairedDataset { root: opts.out_dir.clone(), manifest })
}

/// A dataset directory opened through its manifest.
#[derive(Debug, Clone)]
pub struct PairedDataset {
    pub root: PathBuf,
    pub manifest: Manifest,
}

/// Preprocessed batch plus the raw images it came from.
#[derive(Debug, Clone)]
pub struct LoadedBatch {
    pub batch: PairedBatch,
    pub originals: Vec<CoverImage>,
    pub watermarked: Vec<CoverImage>,
}

impl PairedDataset {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        let path = root.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        if manifest.version != MANIFEST_VERSION {
            return Err(LabError::Data(format!("manifest version {} is not supported", manifest.version)));
        }
        Ok(Self { root, manifest })
    }

    pub fn len(&self) -> usize {
        self.manifest.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.samples.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.manifest.samples.first().map_or(1, |s| s.channels)
    }

    pub fn split(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.manifest.splits.train,
            Split::Val => &self.manifest.splits.val,
            Split::Test => &self.manifest.splits.test,
        }
    }

    fn read_checked(&self, rel: &str, sha: &str) -> Result<CoverImage> {
        let path = self.root.join(rel);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        if sha256_hex(&bytes) != sha {
            return Err(LabError::Integrity(format!("{rel}: content hash does not match the manifest")));
        }
        load_image(&path)
    }

    /// Loads sample `index` (manifest order) after checking both file hashes.
    pub fn load_pair(&self, index: usize) -> Result<(CoverImage, CoverImage)> {
        let s = self
            .manifest
            .samples
            .get(index)
            .ok_or_else(|| LabError::Data(format!("sample {index} out of range")))?;
        Ok((self.read_checked(&s.original_path, &s.original_sha256)?, self.read_checked(&s.watermarked_path, &s.watermarked_sha256)?))
    }

    /// The fixed payload, if the dataset uses one.
    pub fn fixed_watermark(&self) -> Result<Option<WatermarkPayload>> {
        match &self.manifest.watermark {
            WatermarkRef::PerImage => Ok(None),
            WatermarkRef::Fixed { path, sha256 } => {
                let img = self.read_checked(path, sha256)?;
                Ok(Some(WatermarkPayload::from_image(&img, self.manifest.codec.scheme.payload_kind())?))
            }
        }
    }

    /// Ground-truth payload embedded into `original`.
    pub fn watermark_for(&self, original: &CoverImage) -> Result<WatermarkPayload> {
        match self.fixed_watermark()? {
            Some(wm) => Ok(wm),
            None => Ok(per_image_payload(original, self.manifest.codec.scheme.payload_kind())),
        }
    }

    /// Re-embeds every original and compares with its stored watermarked file.
    pub fn verify(&self) -> Result<()> {
        let fixed = self.fixed_watermark()?;
        let kind = self.manifest.codec.scheme.payload_kind();
        for (i, s) in self.manifest.samples.iter().enumerate() {
            let (orig, marked) = self.load_pair(i)?;
            let wm = fixed.clone().unwrap_or_else(|| per_image_payload(&orig, kind));
            if embed(&orig, &wm, &self.manifest.codec)? != marked {
                return Err(LabError::Integrity(format!("pair {} does not re-embed to its watermarked file", s.id)));
            }
        }
        Ok(())
    }

    /// Loads the pairs at `positions` within `split`, preprocessed by `transform`.
    pub fn load_batch(&self, split: Split, positions: &[usize], transform: TransformKind) -> Result<LoadedBatch> {
        let ids = self.split(split);
        let (mut originals, mut watermarked) = (Vec::new(), Vec::new());
        for &p in positions {
            let &i = ids
                .get(p)
                .ok_or_else(|| LabError::Data(format!("position {p} outside {split:?} split of {}", ids.len())))?;
            let (o, w) = self.load_pair(i)?;
            originals.push(o);
            watermarked.push(w);
        }
        let batch = stack(&originals, &watermarked, transform)?;
        Ok(LoadedBatch { batch, originals, watermarked })
    }

    /// Whole split preprocessed once, for fast repeated batching.
    pub fn preload(&self, split: Split, transform: TransformKind) -> Result<Preloaded> {
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        let (mut h, mut w, mut c) = (0, 0, 0);
        for &i in self.split(split) {
            let (o, m) = self.load_pair(i)?;
            (h, w, c) = o.shape();
            inputs.push(encode(&o, transform)?);
            targets.push(encode(&m, transform)?);
        }
        Ok(Preloaded { inputs, targets, channels: transform.rep_channels(c), height: h, width: w })
    }
}

fn stack(originals: &[CoverImage], watermarked: &[CoverImage], transform: TransformKind) -> Result<PairedBatch> {
    let first = originals.first().ok_or_else(|| LabError::Data("empty batch".into()))?;
    let (h, w, c) = first.shape();
    let (mut input, mut target) = (Vec::new(), Vec::new());
    for (o, m) in originals.iter().zip(watermarked) {
        o.ensure_same_shape(first)?;
        o.ensure_same_shape(m)?;
        input.extend(encode(o, transform)?);
        target.extend(encode(m, transform)?);
    }
    let rc = transform.rep_channels(c);
    let n = originals.len();
    Ok(PairedBatch { input: Tensor::from_vec(n, rc, h, w, input), target: Tensor::from_vec(n, rc, h, w, target) })
}

/// A split held in memory in representation space.
#[derive(Debug, Clone)]
pub struct Preloaded {
    pub inputs: Vec<Vec<f32>>,
    pub targets: Vec<Vec<f32>>,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Preloaded {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn batch(&self, positions: &[usize]) -> PairedBatch {
        let mut input = Vec::with_capacity(positions.len() * self.inputs[0].len());
        let mut target = Vec::with_capacity(input.capacity());
        for &p in positions {
            input.extend_from_slice(&self.inputs[p]);
            target.extend_from_slice(&self.targets[p]);
        }
        let (n, c, h, w) = (positions.len(), self.channels, self.height, self.width);
        PairedBatch { input: Tensor::from_vec(n, c, h, w, input), target: Tensor::from_vec(n, c, h, w, target) }
    }
}

/// Positions of the batch used at `step`: epochs of a seeded permutation of
/// `0..len`, so any step can be recomputed without replaying earlier ones.
/// The tail that does not fill a whole batch is dropped each epoch.
pub fn batch_positions(seed: u64, step: u64, batch: usize, len: usize) -> Vec<usize> {
    assert!(len > 0 && batch > 0, "empty split or batch");
    let per_epoch = (len / batch).max(1) as u64;
    let mut order: Vec<usize> = (0..len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step / per_epoch + 1);
    order.shuffle(&mut rng);
    let offset = (step % per_epoch) as usize * batch;
    (0..batch).map(|k| order[(offset + k) % len]).collect()
}
