//! Pixel-space baseline: bilinear pyramid plus a full-extent residual refiner.
//!
//! Resampling uses half-pixel centres: output sample `i` of a factor-`f`
//! upsample reads input coordinate `(i + 0.5) / f - 0.5`, clamped to the
//! image. A factor-`2^L` reduction is `L` successive halvings; each halving
//! samples at `2i + 0.5`, which is the mean of a 2x2 block.

use crate::autodiff::{load_checkpoint, save_checkpoint};
use crate::error::{geometry, invalid, Result};
use crate::image::Image;
use crate::pyramid::{encode, low_pass_decode};
use crate::recon::{
    evaluate_mse, train_network, NetGeometry, Samples, TrainConfig, TrainError, Trained, TrunkConfig, UNet,
    KIND_PIXEL,
};
use crate::wavelet::FilterBank;

fn halve(img: &Image) -> Image {
    let (h, w, c) = img.dims();
    Image::from_fn(h / 2, w / 2, c, |y, x, k| {
        let (y0, x0) = (2 * y, 2 * x);
        0.25 * (img.get(y0, x0, k) + img.get(y0, x0 + 1, k) + img.get(y0 + 1, x0, k) + img.get(y0 + 1, x0 + 1, k))
    })
}

pub fn bilinear_downsample(img: &Image, factor: usize) -> Result<Image> {
    if factor < 2 || !factor.is_power_of_two() {
        return Err(invalid(format!("downsample factor must be a power of two >= 2, got {factor}")));
    }
    let (h, w, _) = img.dims();
    if h % factor != 0 || w % factor != 0 {
        return Err(geometry(format!("{h}x{w} is not divisible by {factor}")));
    }
    let mut cur = halve(img);
    for _ in 1..factor.trailing_zeros() {
        cur = halve(&cur);
    }
    Ok(cur)
}

/// Source index pair and weight of the second for each output position.
fn taps(n_in: usize, factor: usize) -> Vec<(usize, usize, f64)> {
    (0..n_in * factor)
        .map(|i| {
            let s = ((i as f64 + 0.5) / factor as f64 - 0.5).clamp(0.0, (n_in - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(n_in - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

pub fn bilinear_upsample(img: &Image, factor: usize) -> Result<Image> {
    if factor < 2 {
        return Err(invalid(format!("upsample factor must be at least 2, got {factor}")));
    }
    let (h, w, c) = img.dims();
    let ty = taps(h, factor);
    let tx = taps(w, factor);
    let rows = Image::from_fn(h, w * factor, c, |y, x, k| {
        let (a, b, t) = tx[x];
        let (p, q) = (img.get(y, a, k), img.get(y, b, k));
        p + (q - p) * t
    });
    Ok(Image::from_fn(h * factor, w * factor, c, |y, x, k| {
        let (a, b, t) = ty[y];
        let (p, q) = (rows.get(a, x, k), rows.get(b, x, k));
        p + (q - p) * t
    }))
}

/// Bilinear latent of the pixel path.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelCode {
    pub levels: usize,
    pub low: Image,
    pub original_height: usize,
    pub original_width: usize,
    pub channels: usize,
}

pub fn pixel_encode(img: &Image, levels: usize) -> Result<PixelCode> {
    if levels == 0 {
        return Err(invalid("levels must be at least 1"));
    }
    let (h, w, c) = img.dims();
    Ok(PixelCode {
        levels,
        low: bilinear_downsample(img, 1 << levels)?,
        original_height: h,
        original_width: w,
        channels: c,
    })
}

/// Residual refiner for one pixel level; operates at the full target extent.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelRefiner {
    pub level: usize,
    net: UNet,
}

impl PixelRefiner {
    /// `extent` is the side of the level's output (twice its input).
    pub fn build(level: usize, extent: usize, channels: usize, trunk: TrunkConfig, seed: u64) -> Result<Self> {
        if level == 0 {
            return Err(invalid("levels are numbered from 1"));
        }
        let g = NetGeometry {
            in_channels: channels,
            in_extent: extent,
            out_extent: extent,
            out_channels: channels,
            heads: 1,
        };
        Ok(PixelRefiner {
            level,
            net: UNet::new(g, trunk, seed)?,
        })
    }

    pub fn extent(&self) -> usize {
        self.net.geometry().in_extent
    }

    pub fn channels(&self) -> usize {
        self.net.geometry().in_channels
    }

    pub fn net(&self) -> &UNet {
        &self.net
    }

    pub fn zero_heads(&mut self) {
        self.net.zero_heads();
    }

    pub fn residual(&self, upsampled: &Image) -> Result<Image> {
        let (n, c) = (self.extent(), self.channels());
        if upsampled.dims() != (n, n, c) {
            return Err(geometry(format!(
                "level {} refiner expects {n}x{n}x{c}, got {:?}",
                self.level,
                upsampled.dims()
            )));
        }
        let y = self.net.run(&upsampled.to_planar(), 1)?;
        Image::from_planar(n, n, c, &y)
    }

    pub fn save(&self) -> Result<Vec<u8>> {
        Ok(save_checkpoint(&self.net.to_entries(KIND_PIXEL, self.level, self.extent()))?)
    }

    pub fn load(bytes: &[u8], level: usize) -> Result<Self> {
        let (kind, stored, _, net) = UNet::from_entries(load_checkpoint(bytes)?)?;
        if kind != KIND_PIXEL {
            return Err(geometry("checkpoint is not a pixel refiner"));
        }
        if stored != level {
            return Err(geometry(format!(
                "checkpoint is for level {stored}, requested level {level}"
            )));
        }
        Ok(PixelRefiner { level, net })
    }
}

/// `up2(low) + refiner(up2(low))`.
pub fn pixel_decode_level(low: &Image, refiner: &PixelRefiner) -> Result<Image> {
    let up = bilinear_upsample(low, 2)?;
    let r = refiner.residual(&up)?;
    up.axpby(1.0, &r, 1.0)
}

/// Decodes from `code.levels` down to 1; `refiners[l - 1]` serves level `l`.
pub fn pixel_decode(code: &PixelCode, refiners: &[&PixelRefiner]) -> Result<Image> {
    if refiners.len() != code.levels {
        return Err(geometry(format!(
            "code has {} levels but {} refiners were supplied",
            code.levels,
            refiners.len()
        )));
    }
    let mut cur = code.low.clone();
    for l in (1..=code.levels).rev() {
        cur = pixel_decode_level(&cur, refiners[l - 1])?;
    }
    Ok(cur)
}

/// Refiner inputs (upsampled level-`l` image) and residual targets.
pub fn pixel_samples(images: &[Image], level: usize) -> Result<Samples> {
    if level == 0 {
        return Err(invalid("levels are numbered from 1"));
    }
    let mut s = Samples::default();
    for img in images {
        let target = if level == 1 {
            img.clone()
        } else {
            bilinear_downsample(img, 1 << (level - 1))?
        };
        let up = bilinear_upsample(&halve(&target), 2)?;
        let residual = target.axpby(1.0, &up, -1.0)?;
        s.inputs.push(up.to_planar());
        s.targets.push(residual.to_planar());
    }
    Ok(s)
}

pub fn train_refiner(
    refiner: PixelRefiner,
    train: &[Image],
    val: Option<&[Image]>,
    cfg: &TrainConfig,
) -> Result<Trained<PixelRefiner>, TrainError<PixelRefiner>> {
    if train.is_empty() {
        return Err(TrainError::Setup(invalid("training set is empty")));
    }
    let level = refiner.level;
    let ts = pixel_samples(train, level).map_err(TrainError::Setup)?;
    let vs = val.map(|v| pixel_samples(v, level)).transpose().map_err(TrainError::Setup)?;
    let wrap = |net| PixelRefiner { level, net };
    match train_network(refiner.net, &ts, vs.as_ref(), cfg) {
        Ok(t) => Ok(Trained {
            model: wrap(t.model),
            history: t.history,
        }),
        Err(e) => Err(e.map_model(wrap)),
    }
}

pub fn evaluate_refiner(refiner: &PixelRefiner, images: &[Image], batch_size: usize) -> Result<f64> {
    evaluate_mse(&refiner.net, &pixel_samples(images, refiner.level)?, batch_size)
}

/// Deterministic reconstruction MSE of both paths for one image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareRow {
    pub image_id: usize,
    pub wavelet_mse: f64,
    pub pixel_mse: f64,
}

fn mse(a: &Image, b: &Image) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Low-pass wavelet decode versus bilinear down/up, per image.
pub fn compare_information_content(images: &[Image], levels: usize, fb: &FilterBank) -> Result<Vec<CompareRow>> {
    if images.is_empty() {
        return Err(invalid("comparison corpus is empty"));
    }
    images
        .iter()
        .enumerate()
        .map(|(image_id, x)| {
            let w = low_pass_decode(&encode(x, levels, fb)?, fb)?;
            let p = bilinear_upsample(&bilinear_downsample(x, 1 << levels)?, 1 << levels)?;
            Ok(CompareRow {
                image_id,
                wavelet_mse: mse(&w, x),
                pixel_mse: mse(&p, x),
            })
        })
        .collect()
}

/// Per-image rows followed by a `mean` row.
pub fn compare_csv(rows: &[CompareRow]) -> String {
    let mut s = String::from("image_id,wavelet_mse,pixel_mse\n");
    for r in rows {
        s.push_str(&format!("{},{:.9e},{:.9e}\n", r.image_id, r.wavelet_mse, r.pixel_mse));
    }
    let n = rows.len().max(1) as f64;
    let wm = rows.iter().map(|r| r.wavelet_mse).sum::<f64>() / n;
    let pm = rows.iter().map(|r| r.pixel_mse).sum::<f64>() / n;
    s.push_str(&format!("mean,{wm:.9e},{pm:.9e}\n"));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::make_filter_bank;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_img(seed: u64, n: usize, c: usize) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(n, n, c, |_, _, _| rng.random_range(0.0..1.0))
    }

    #[test]
    fn hand_computed_downsample() {
        let x = Image::new(2, 2, 1, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(bilinear_downsample(&x, 2).unwrap().data(), &[0.5]);
        assert!(bilinear_downsample(&rand_img(0, 6, 1), 4).is_err());
        assert!(bilinear_downsample(&rand_img(0, 8, 1), 3).is_err());
    }

    #[test]
    fn upsample_weights() {
        let x = Image::new(1, 2, 1, vec![0.0, 1.0]).unwrap();
        let y = bilinear_upsample(&x, 2).unwrap();
        assert_eq!(y.dims(), (2, 4, 1));
        assert_eq!(&y.data()[..4], &[0.0, 0.25, 0.75, 1.0]);
        assert!(bilinear_upsample(&x, 1).is_err());
    }

    #[test]
    fn constants_survive_round_trip() {
        let c = Image::filled(16, 16, 3, 0.37);
        let d = bilinear_downsample(&c, 4).unwrap();
        assert!(d.data().iter().all(|v| *v == 0.37));
        let u = bilinear_upsample(&d, 4).unwrap();
        assert!(u.max_abs_diff(&c) == 0.0);
    }

    #[test]
    fn down_up_loses_information() {
        let x = rand_img(1, 16, 1);
        let y = bilinear_upsample(&bilinear_downsample(&x, 2).unwrap(), 2).unwrap();
        assert!(mse(&x, &y) > 1e-3);
    }

    #[test]
    fn zero_refiner_is_bilinear_upsample_bitwise() {
        let mut r = PixelRefiner::build(1, 16, 3, TrunkConfig { width: 4, head_width: 4, stages: 1 }, 0).unwrap();
        r.zero_heads();
        let low = rand_img(2, 8, 3);
        let out = pixel_decode_level(&low, &r).unwrap();
        let up = bilinear_upsample(&low, 2).unwrap();
        assert!(out.data().iter().zip(up.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(out.dims(), (16, 16, 3));
        assert!(pixel_decode_level(&rand_img(2, 4, 3), &r).is_err());
    }

    #[test]
    fn refiner_checkpoint_round_trip() {
        let r = PixelRefiner::build(2, 8, 1, TrunkConfig { width: 4, head_width: 4, stages: 1 }, 3).unwrap();
        let bytes = r.save().unwrap();
        assert_eq!(PixelRefiner::load(&bytes, 2).unwrap(), r);
        assert!(PixelRefiner::load(&bytes, 1).is_err());
    }

    #[test]
    fn refiner_training_beats_zero() {
        let imgs: Vec<Image> = (0..4)
            .map(|s| Image::from_fn(8, 8, 1, |y, x, _| if (x + y + s) % 3 == 0 { 1.0 } else { 0.0 }))
            .collect();
        let r = PixelRefiner::build(1, 8, 1, TrunkConfig { width: 8, head_width: 8, stages: 1 }, 0).unwrap();
        let mut zero = r.clone();
        zero.zero_heads();
        let cfg = TrainConfig {
            learning_rate: 3e-3,
            batch_size: 4,
            iterations: 200,
            ..Default::default()
        };
        let trained = train_refiner(r, &imgs, None, &cfg).unwrap().model;
        assert!(evaluate_refiner(&trained, &imgs, 4).unwrap() < evaluate_refiner(&zero, &imgs, 4).unwrap());
    }

    #[test]
    fn compare_report_is_deterministic() {
        let fb = make_filter_bank("bior2.2").unwrap();
        let imgs = vec![Image::filled(16, 16, 1, 0.5), rand_img(3, 16, 1)];
        let rows = compare_information_content(&imgs, 2, &fb).unwrap();
        assert!(rows[0].wavelet_mse < 1e-24);
        assert_eq!(rows[0].pixel_mse, 0.0);
        assert!(rows[1].pixel_mse > 0.0);
        assert_eq!(compare_csv(&rows), compare_csv(&compare_information_content(&imgs, 2, &fb).unwrap()));
        let swapped = compare_information_content(&[imgs[1].clone(), imgs[0].clone()], 2, &fb).unwrap();
        assert_eq!(swapped[0].pixel_mse, rows[1].pixel_mse);
        assert!(compare_information_content(&[], 1, &fb).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn resamplers_are_linear(seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let x = rand_img(seed, 8, 2);
            let y = rand_img(seed.wrapping_add(1), 8, 2);
            let xy = x.axpby(a, &y, b).unwrap();
            let lhs = bilinear_upsample(&bilinear_downsample(&xy, 2).unwrap(), 2).unwrap();
            let fx = bilinear_upsample(&bilinear_downsample(&x, 2).unwrap(), 2).unwrap();
            let fy = bilinear_upsample(&bilinear_downsample(&y, 2).unwrap(), 2).unwrap();
            let rhs = fx.axpby(a, &fy, b).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-10);
        }
    }
}
