//! Class-conditional diagonal Gaussian over `tl` latents, with truncation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::container::{check_finite, to_u32, to_u8, Reader, Writer};
use crate::error::{geometry, invalid, FormatError, Result};
use crate::image::Image;

pub const SAMPLER_MAGIC: &[u8; 4] = b"NSBP";
pub const SAMPLER_VERSION: u16 = 1;

/// Noise scale `t` in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TruncationLevel(f64);

impl TruncationLevel {
    pub const FULL: TruncationLevel = TruncationLevel(1.0);

    pub fn new(t: f64) -> Result<Self> {
        if t > 0.0 && t <= 1.0 {
            Ok(TruncationLevel(t))
        } else {
            Err(invalid(format!("truncation must lie in (0, 1], got {t}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Per-class mean and population variance of every `tl` coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerModel {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
}

impl SamplerModel {
    pub fn class_count(&self) -> usize {
        self.means.len()
    }

    pub fn mean(&self, class: usize) -> Option<&[f64]> {
        self.means.get(class).map(Vec::as_slice)
    }

    pub fn variance(&self, class: usize) -> Option<&[f64]> {
        self.variances.get(class).map(Vec::as_slice)
    }

    fn check_class(&self, class: usize) -> Result<()> {
        if class < self.class_count() {
            Ok(())
        } else {
            Err(invalid(format!(
                "unknown class {class}; model has {} classes",
                self.class_count()
            )))
        }
    }
}

fn check_latents(tls: &[Image], labels: &[usize]) -> Result<(usize, usize, usize)> {
    if tls.len() != labels.len() {
        return Err(invalid(format!("{} latents but {} labels", tls.len(), labels.len())));
    }
    let dims = tls.first().ok_or_else(|| invalid("no latents"))?.dims();
    if let Some(i) = tls.iter().position(|t| t.dims() != dims) {
        return Err(geometry(format!("latent {i} is {:?}, expected {dims:?}", tls[i].dims())));
    }
    Ok(dims)
}

/// Two-pass moments per class. Labels must cover `0..K` with at least two
/// examples each.
pub fn fit_sampler(tls: &[Image], labels: &[usize]) -> Result<SamplerModel> {
    let (height, width, channels) = check_latents(tls, labels)?;
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let d = height * width * channels;
    let mut means = Vec::with_capacity(classes);
    let mut variances = Vec::with_capacity(classes);
    for class in 0..classes {
        let members: Vec<&Image> = tls.iter().zip(labels).filter(|(_, l)| **l == class).map(|(t, _)| t).collect();
        if members.len() < 2 {
            return Err(invalid(format!(
                "class {class} has {} example(s); at least 2 are required",
                members.len()
            )));
        }
        let n = members.len() as f64;
        let mut mu = vec![0.0; d];
        for m in &members {
            for (a, v) in mu.iter_mut().zip(m.data()) {
                *a += v;
            }
        }
        mu.iter_mut().for_each(|a| *a /= n);
        let mut var = vec![0.0; d];
        for m in &members {
            for ((a, v), u) in var.iter_mut().zip(m.data()).zip(&mu) {
                *a += (v - u) * (v - u);
            }
        }
        var.iter_mut().for_each(|a| *a /= n);
        means.push(mu);
        variances.push(var);
    }
    Ok(SamplerModel {
        height,
        width,
        channels,
        means,
        variances,
    })
}

/// `n` draws of `mu + t * sigma * eps`, `eps ~ N(0, I)`.
pub fn sample(model: &SamplerModel, class: usize, t: TruncationLevel, n: usize, seed: u64) -> Result<Vec<Image>> {
    model.check_class(class)?;
    if n == 0 {
        return Err(invalid("sample count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu = &model.means[class];
    let sd: Vec<f64> = model.variances[class].iter().map(|v| t.0 * v.sqrt()).collect();
    (0..n)
        .map(|_| {
            let z = mu
                .iter()
                .zip(&sd)
                .map(|(m, s)| {
                    let e: f64 = rng.sample(StandardNormal);
                    m + s * e
                })
                .collect();
            Image::new(model.height, model.width, model.channels, z)
        })
        .collect()
}

/// Uniform draws with replacement from the latents of `class`.
pub fn empirical_sample(tls: &[Image], labels: &[usize], class: usize, n: usize, seed: u64) -> Result<Vec<Image>> {
    check_latents(tls, labels)?;
    let pool: Vec<&Image> = tls.iter().zip(labels).filter(|(_, l)| **l == class).map(|(t, _)| t).collect();
    if pool.is_empty() {
        return Err(invalid(format!("class {class} has no examples")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| pool[rng.random_range(0..pool.len())].clone()).collect())
}

/// NSBP container: magic, u16 version, u16 class count, u32 height, u32
/// width, u8 channels, then per class the mean and variance arrays as f32.
pub fn serialize_sampler(model: &SamplerModel) -> Result<Vec<u8>, FormatError> {
    let mut w = Writer::with_header(SAMPLER_MAGIC, SAMPLER_VERSION);
    let k = u16::try_from(model.class_count())
        .map_err(|_| FormatError::Malformed("too many classes".into()))?;
    w.u16(k);
    w.u32(to_u32(model.height, "height")?);
    w.u32(to_u32(model.width, "width")?);
    w.u8(to_u8(model.channels, "channels")?);
    for (m, v) in model.means.iter().zip(&model.variances) {
        w.f32s(m);
        w.f32s(v);
    }
    Ok(w.finish())
}

pub fn deserialize_sampler(bytes: &[u8]) -> Result<SamplerModel, FormatError> {
    let mut r = Reader::header(bytes, SAMPLER_MAGIC, SAMPLER_VERSION)?;
    let k = r.u16()? as usize;
    let height = r.u32()? as usize;
    let width = r.u32()? as usize;
    let channels = r.u8()? as usize;
    if height == 0 || width == 0 || channels == 0 {
        return Err(FormatError::Malformed("zero latent extent".into()));
    }
    let d = height * width * channels;
    let mut means = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);
    for _ in 0..k {
        let m = r.f32s(d)?;
        let v = r.f32s(d)?;
        check_finite(&m, "mean")?;
        check_finite(&v, "variance")?;
        if v.iter().any(|x| *x < 0.0) {
            return Err(FormatError::Malformed("negative variance".into()));
        }
        means.push(m);
        variances.push(v);
    }
    r.expect_end()?;
    Ok(SamplerModel {
        height,
        width,
        channels,
        means,
        variances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn latents(values: &[&[f64]]) -> Vec<Image> {
        values
            .iter()
            .map(|v| Image::new(1, v.len(), 1, v.to_vec()).unwrap())
            .collect()
    }

    #[test]
    fn moments_of_plus_minus_one() {
        let tls = latents(&[&[-1.0, 1.0], &[1.0, -1.0], &[3.0, 3.0], &[3.0, 3.0]]);
        let m = fit_sampler(&tls, &[0, 0, 1, 1]).unwrap();
        assert_eq!(m.mean(0).unwrap(), &[0.0, 0.0]);
        assert_eq!(m.variance(0).unwrap(), &[1.0, 1.0]);
        assert_eq!(m.variance(1).unwrap(), &[0.0, 0.0]);
        assert_eq!(m.class_count(), 2);
    }

    #[test]
    fn singleton_class_named() {
        let tls = latents(&[&[0.0], &[1.0], &[2.0]]);
        let msg = fit_sampler(&tls, &[0, 0, 1]).unwrap_err().to_string();
        assert!(msg.contains("class 1"), "{msg}");
    }

    #[test]
    fn sample_validation_and_determinism() {
        let tls = latents(&[&[0.0, 1.0], &[2.0, 5.0]]);
        let m = fit_sampler(&tls, &[0, 0]).unwrap();
        assert!(sample(&m, 1, TruncationLevel::FULL, 1, 0).is_err());
        assert!(sample(&m, 0, TruncationLevel::FULL, 0, 0).is_err());
        assert!(TruncationLevel::new(0.0).is_err());
        assert!(TruncationLevel::new(1.5).is_err());
        let t = TruncationLevel::new(0.4).unwrap();
        assert_eq!(sample(&m, 0, t, 3, 9).unwrap(), sample(&m, 0, t, 3, 9).unwrap());
        assert_ne!(sample(&m, 0, t, 3, 9).unwrap(), sample(&m, 0, t, 3, 10).unwrap());
    }

    #[test]
    fn truncated_std_and_mean() {
        let tls = latents(&[&[-1.0, 10.0], &[1.0, 14.0]]);
        let m = fit_sampler(&tls, &[0, 0]).unwrap();
        let n = 10_000;
        let stats = |t: f64| {
            let s = sample(&m, 0, TruncationLevel::new(t).unwrap(), n, 5).unwrap();
            (0..2)
                .map(|j| {
                    let xs: Vec<f64> = s.iter().map(|i| i.data()[j]).collect();
                    let mu = xs.iter().sum::<f64>() / n as f64;
                    let var = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n as f64;
                    (mu, var.sqrt())
                })
                .collect::<Vec<_>>()
        };
        let full = stats(1.0);
        let sigma = [1.0, 2.0];
        let mu = [0.0, 12.0];
        for j in 0..2 {
            assert!((full[j].0 - mu[j]).abs() < 5.0 * sigma[j] / (n as f64).sqrt());
        }
        let tiny = stats(0.01);
        let mid = stats(0.4);
        for j in 0..2 {
            assert!(tiny[j].1 <= 0.02 * sigma[j]);
            assert!(mid[j].1 < full[j].1);
        }
    }

    #[test]
    fn empirical_members_only() {
        let tls = latents(&[&[1.0], &[2.0], &[3.0]]);
        let labels = [0, 1, 1];
        assert_eq!(empirical_sample(&tls, &labels, 0, 1, 0).unwrap(), vec![tls[0].clone()]);
        let s = empirical_sample(&tls, &labels, 1, 20, 4).unwrap();
        assert!(s.iter().all(|x| *x == tls[1] || *x == tls[2]));
        assert_eq!(s, empirical_sample(&tls, &labels, 1, 20, 4).unwrap());
        assert!(empirical_sample(&tls, &labels, 2, 1, 0).is_err());
    }

    #[test]
    fn container_round_trip_and_faults() {
        let tls = latents(&[&[0.1, 0.7], &[0.3, -0.2], &[1.0, 2.0], &[1.5, 2.5]]);
        let m = fit_sampler(&tls, &[0, 0, 1, 1]).unwrap();
        let bytes = serialize_sampler(&m).unwrap();
        let back = deserialize_sampler(&bytes).unwrap();
        assert_eq!(serialize_sampler(&back).unwrap(), bytes);
        assert_eq!(back.class_count(), 2);
        let mut bad = bytes.clone();
        bad[3] = 0;
        assert!(matches!(deserialize_sampler(&bad), Err(FormatError::BadMagic { .. })));
        assert!(matches!(
            deserialize_sampler(&bytes[..bytes.len() - 3]),
            Err(FormatError::Truncated { .. })
        ));
    }
}
