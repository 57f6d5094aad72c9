//! Seeded procedural corpus of shapes and textures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::image::Image;

pub const TOY_CLASSES: [&str; 8] = [
    "disks",
    "squares",
    "hstripes",
    "vstripes",
    "dstripes",
    "checkers",
    "rings",
    "blobs",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToyCorpusConfig {
    pub classes: usize,
    pub per_class: usize,
    pub extent: usize,
    pub seed: u64,
}

impl Default for ToyCorpusConfig {
    fn default() -> Self {
        ToyCorpusConfig {
            classes: TOY_CLASSES.len(),
            per_class: 32,
            extent: 64,
            seed: 0,
        }
    }
}

/// One labelled corpus entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyImage {
    pub class: usize,
    pub name: String,
    pub image: Image,
}

fn color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [rng.random_range(0.05..0.95), rng.random_range(0.05..0.95), rng.random_range(0.05..0.95)]
}

fn mix(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}

/// Renders one image of `class` with 2x2 supersampling. Coordinates passed
/// to the shape function are in `[0, 1)`.
pub fn toy_image(class: usize, extent: usize, rng: &mut ChaCha8Rng) -> Result<Image> {
    if class >= TOY_CLASSES.len() {
        return Err(invalid(format!("class {class} out of range 0..{}", TOY_CLASSES.len())));
    }
    let bg = color(rng);
    let fg = color(rng);
    let shape: Box<dyn Fn(f64, f64) -> [f64; 3]> = match class {
        0 => {
            let disks: Vec<(f64, f64, f64)> = (0..rng.random_range(1..4))
                .map(|_| (rng.random_range(0.2..0.8), rng.random_range(0.2..0.8), rng.random_range(0.08..0.25)))
                .collect();
            Box::new(move |u, v| {
                let inside = disks.iter().any(|&(cx, cy, r)| (u - cx).powi(2) + (v - cy).powi(2) < r * r);
                if inside { fg } else { bg }
            })
        }
        1 => {
            let (cx, cy) = (rng.random_range(0.3..0.7), rng.random_range(0.3..0.7));
            let half = rng.random_range(0.1..0.3);
            let angle: f64 = rng.random_range(0.0..std::f64::consts::FRAC_PI_2);
            let (s, c) = angle.sin_cos();
            Box::new(move |u, v| {
                let (du, dv) = (u - cx, v - cy);
                let (a, b) = (c * du + s * dv, -s * du + c * dv);
                if a.abs() < half && b.abs() < half { fg } else { bg }
            })
        }
        2..=4 => {
            let period = rng.random_range(0.08..0.25);
            let phase = rng.random_range(0.0..1.0);
            Box::new(move |u, v| {
                let t = match class {
                    2 => v,
                    3 => u,
                    _ => (u + v) / std::f64::consts::SQRT_2,
                };
                let s = ((t / period + phase) * std::f64::consts::TAU).sin();
                mix(bg, fg, 0.5 + 0.5 * s)
            })
        }
        5 => {
            let cells = rng.random_range(3..9) as f64;
            let (ou, ov) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
            Box::new(move |u, v| {
                let a = ((u * cells + ou).floor() + (v * cells + ov).floor()) as i64;
                if a.rem_euclid(2) == 0 { fg } else { bg }
            })
        }
        6 => {
            let (cx, cy) = (rng.random_range(0.3..0.7), rng.random_range(0.3..0.7));
            let width = rng.random_range(0.04..0.1);
            Box::new(move |u, v| {
                let r = ((u - cx).powi(2) + (v - cy).powi(2)).sqrt();
                if ((r / width) as i64) % 2 == 0 { fg } else { bg }
            })
        }
        _ => {
            let end = color(rng);
            let dir: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let blobs: Vec<(f64, f64, f64, f64)> = (0..rng.random_range(2..5))
                .map(|_| {
                    (
                        rng.random_range(0.1..0.9),
                        rng.random_range(0.1..0.9),
                        rng.random_range(0.05..0.15),
                        rng.random_range(-0.4..0.4),
                    )
                })
                .collect();
            Box::new(move |u, v| {
                let t = 0.5 + 0.5 * ((u - 0.5) * dir.cos() + (v - 0.5) * dir.sin()) * std::f64::consts::SQRT_2;
                let base = mix(bg, end, t.clamp(0.0, 1.0));
                let bump: f64 = blobs
                    .iter()
                    .map(|&(bx, by, s, a)| a * (-((u - bx).powi(2) + (v - by).powi(2)) / (2.0 * s * s)).exp())
                    .sum();
                base.map(|x| x + bump)
            })
        }
    };
    let n = extent as f64;
    let mut img = Image::zeros(extent, extent, 3);
    for y in 0..extent {
        for x in 0..extent {
            let mut acc = [0.0; 3];
            for (sy, sx) in [(0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)] {
                let c = shape((x as f64 + sx) / n, (y as f64 + sy) / n);
                for k in 0..3 {
                    acc[k] += c[k] / 4.0;
                }
            }
            for (k, a) in acc.iter().enumerate() {
                img.set(y, x, k, a.clamp(0.0, 1.0));
            }
        }
    }
    Ok(img)
}

/// `classes x per_class` images, class-major; entry `i` of class `c` is named
/// `"{class name}/{i:03}"`.
pub fn toy_corpus(cfg: &ToyCorpusConfig) -> Result<Vec<ToyImage>> {
    if cfg.classes == 0 || cfg.classes > TOY_CLASSES.len() || cfg.per_class == 0 || cfg.extent < 2 {
        return Err(invalid(format!(
            "toy corpus needs 1..={} classes, at least one image each and extent >= 2",
            TOY_CLASSES.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.classes * cfg.per_class);
    for (class, label) in TOY_CLASSES.iter().enumerate().take(cfg.classes) {
        for i in 0..cfg.per_class {
            out.push(ToyImage {
                class,
                name: format!("{label}/{i:03}"),
                image: toy_image(class, cfg.extent, &mut rng)?,
            });
        }
    }
    Ok(out)
}
