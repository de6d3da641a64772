//! Procedural stand-ins for a natural-image corpus and the fixed logo
//! watermark, so experiments run without downloading anything.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wmfaker_core::{CoverImage, PayloadKind, WatermarkPayload};

const LOGO_ART: [&str; 16] = [
    "................",
    ".##..........##.",
    ".##..........##.",
    ".##....##....##.",
    ".##...####...##.",
    ".##..##..##..##.",
    ".##.##....##.##.",
    ".####......####.",
    ".###........###.",
    "................",
    "..############..",
    "..#..........#..",
    "..#..######..#..",
    "..#..........#..",
    "..############..",
    "................",
];

/// The fixed binary logo, nearest-neighbour resampled to `height x width`.
pub fn logo(height: usize, width: usize, kind: PayloadKind) -> WatermarkPayload {
    WatermarkPayload::from_fn(height, width, kind, |y, x| {
        let row = LOGO_ART[y * 16 / height].as_bytes();
        row[x * 16 / width] == b'#'
    })
}

/// Logo sized for a cover of `height x width` under the given payload kind.
pub fn logo_for(height: usize, width: usize, kind: PayloadKind) -> WatermarkPayload {
    let (h, w) = kind.shape_for(height, width);
    logo(h, w, kind)
}

fn value_noise(rng: &mut ChaCha8Rng, size: usize, cells: usize) -> Vec<f64> {
    let grid: Vec<f64> = (0..(cells + 1) * (cells + 1)).map(|_| rng.random::<f64>()).collect();
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    let mut out = vec![0.0; size * size];
    for y in 0..size {
        for x in 0..size {
            let fy = y as f64 * cells as f64 / size as f64;
            let fx = x as f64 * cells as f64 / size as f64;
            let (iy, ix) = (fy as usize, fx as usize);
            let (ty, tx) = (smooth(fy - iy as f64), smooth(fx - ix as f64));
            let g = |yy: usize, xx: usize| grid[yy * (cells + 1) + xx];
            let top = g(iy, ix) * (1.0 - tx) + g(iy, ix + 1) * tx;
            let bottom = g(iy + 1, ix) * (1.0 - tx) + g(iy + 1, ix + 1) * tx;
            out[y * size + x] = top * (1.0 - ty) + bottom * ty;
        }
    }
    out
}

/// A square "natural-looking" image: fractal value noise, a few soft-edged
/// shapes, and mild per-pixel sensor noise.
pub fn natural_image(size: usize, channels: usize, seed: u64) -> CoverImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut planes = Vec::with_capacity(channels);
    let mut base = vec![0.0; size * size];
    let mut amp = 1.0;
    for octave in 0..5 {
        let layer = value_noise(&mut rng, size, 2 << octave);
        base.iter_mut().zip(&layer).for_each(|(b, l)| *b += amp * (l - 0.5));
        amp *= 0.55;
    }
    for _ in 0..rng.random_range(1..4) {
        let (cy, cx) = (rng.random::<f64>() * size as f64, rng.random::<f64>() * size as f64);
        let (ry, rx) = (4.0 + rng.random::<f64>() * size as f64 / 3.0, 4.0 + rng.random::<f64>() * size as f64 / 3.0);
        let level = rng.random::<f64>() - 0.5;
        for y in 0..size {
            for x in 0..size {
                let d = ((y as f64 - cy) / ry).powi(2) + ((x as f64 - cx) / rx).powi(2);
                let w = 1.0 / (1.0 + ((d - 1.0) * 6.0).exp());
                base[y * size + x] = base[y * size + x] * (1.0 - w) + level * w;
            }
        }
    }
    let (lo, hi) = base.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    let span = (hi - lo).max(1e-9);
    let floor = 20.0 + rng.random::<f64>() * 40.0;
    let range = 120.0 + rng.random::<f64>() * 60.0;
    for _ in 0..channels {
        let tint = if channels == 1 { 0.0 } else { (rng.random::<f64>() - 0.5) * 30.0 };
        let plane: Vec<u8> = base
            .iter()
            .map(|&v| {
                let noise = (rng.random::<f64>() + rng.random::<f64>() + rng.random::<f64>() - 1.5) * 4.0;
                (floor + tint + (v - lo) / span * range + noise).round().clamp(0.0, 255.0) as u8
            })
            .collect();
        planes.push(plane);
    }
    CoverImage::from_fn(size, size, channels, |y, x, c| planes[c][y * size + x]).expect("valid synthetic image")
}
