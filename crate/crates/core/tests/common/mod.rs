#![allow(dead_code)]

use nsb_core::autodiff::{OpKind, Tape, Tensor, Var};
use nsb_core::corpus::{toy_corpus, ToyCorpusConfig, ToyImage};
use nsb_core::Image;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rand_image(seed: u64, h: usize, w: usize, c: usize) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Image::from_fn(h, w, c, |_, _, _| rng.random::<f64>())
}

/// Values of magnitude in `[0.1, 1]` with random sign, keeping `leaky_relu`
/// inputs away from its kink.
fn tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng.random_range(0.1..1.0);
            if rng.random::<bool>() {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::new(shape, data).unwrap()
}

pub type Forward = Box<dyn Fn(&mut Tape, &[Var]) -> nsb_core::Result<Var>>;

/// Parameters and a scalar loss isolating one op kind; every op other than
/// `mse_loss` is followed by an `mse_loss` against a fixed target.
pub fn op_case(kind: OpKind, seed: u64) -> (Vec<Tensor>, Forward) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let img = [2, 3, 4, 4];
    let x = tensor(&mut rng, img.to_vec());
    let target_for = |rng: &mut ChaCha8Rng, shape: Vec<usize>| tensor(rng, shape).data().to_vec();
    match kind {
        OpKind::Conv2d => {
            let w = tensor(&mut rng, vec![2, 3, 3, 3]);
            let b = tensor(&mut rng, vec![2]);
            let t = target_for(&mut rng, vec![2, 2, 4, 4]);
            (
                vec![x, w, b],
                Box::new(move |tape, p| {
                    let y = tape.conv2d(p[0], p[1], p[2])?;
                    let t = tape.constant(vec![2, 2, 4, 4], t.clone())?;
                    tape.mse_loss(y, t)
                }),
            )
        }
        OpKind::Stride2Downsample => {
            let t = target_for(&mut rng, vec![2, 3, 2, 2]);
            (
                vec![x],
                Box::new(move |tape, p| {
                    let y = tape.stride2_downsample(p[0])?;
                    let t = tape.constant(vec![2, 3, 2, 2], t.clone())?;
                    tape.mse_loss(y, t)
                }),
            )
        }
        OpKind::NearestUpsample2x => {
            let t = target_for(&mut rng, vec![2, 3, 8, 8]);
            (
                vec![x],
                Box::new(move |tape, p| {
                    let y = tape.nearest_upsample2x(p[0])?;
                    let t = tape.constant(vec![2, 3, 8, 8], t.clone())?;
                    tape.mse_loss(y, t)
                }),
            )
        }
        OpKind::ConcatChannels => {
            let y = tensor(&mut rng, vec![2, 1, 4, 4]);
            let t = target_for(&mut rng, vec![2, 4, 4, 4]);
            (
                vec![x, y],
                Box::new(move |tape, p| {
                    let y = tape.concat_channels(p[0], p[1])?;
                    let t = tape.constant(vec![2, 4, 4, 4], t.clone())?;
                    tape.mse_loss(y, t)
                }),
            )
        }
        OpKind::LeakyRelu => {
            let t = target_for(&mut rng, img.to_vec());
            (
                vec![x],
                Box::new(move |tape, p| {
                    let y = tape.leaky_relu(p[0], 0.2)?;
                    let t = tape.constant(img.to_vec(), t.clone())?;
                    tape.mse_loss(y, t)
                }),
            )
        }
        OpKind::Add => {
            let y = tensor(&mut rng, img.to_vec());
            let t = target_for(&mut rng, img.to_vec());
            (
                vec![x, y],
                Box::new(move |tape, p| {
                    let y = tape.add(p[0], p[1])?;
                    let t = tape.constant(img.to_vec(), t.clone())?;
                    tape.mse_loss(y, t)
                }),
            )
        }
        OpKind::MseLoss => {
            let y = tensor(&mut rng, img.to_vec());
            (vec![x, y], Box::new(|tape, p| tape.mse_loss(p[0], p[1])))
        }
    }
}

pub struct ToySplit {
    pub corpus: Vec<ToyImage>,
    pub is_val: Vec<bool>,
}

impl ToySplit {
    /// The seeded 8 x 32 corpus at 64 x 64 with a seeded 80/20 split.
    pub fn standard() -> Self {
        let corpus = toy_corpus(&ToyCorpusConfig::default()).unwrap();
        let n = corpus.len();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(0));
        let mut is_val = vec![false; n];
        for &i in &idx[..(n as f64 * 0.2).round() as usize] {
            is_val[i] = true;
        }
        ToySplit { corpus, is_val }
    }

    pub fn images(&self) -> Vec<Image> {
        self.corpus.iter().map(|t| t.image.clone()).collect()
    }
}
