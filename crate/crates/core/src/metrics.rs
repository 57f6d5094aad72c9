//! MSE, PSNR and Fréchet distance over deterministic image features.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{geometry, invalid, Result};
use crate::image::Image;

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    if !a.same_dims(b) {
        return Err(geometry(format!("mse of {:?} and {:?}", a.dims(), b.dims())));
    }
    if a.is_empty() {
        return Err(invalid("mse of empty images"));
    }
    Ok(a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

/// `10 log10(peak^2 / mse)`; identical images give `f64::INFINITY`.
pub fn psnr(a: &Image, b: &Image, peak: f64) -> Result<f64> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / m).log10())
}

pub const PIXEL_MOMENTS_GRID: usize = 8;
pub const PIXEL_MOMENTS_DIM: usize = 2 * PIXEL_MOMENTS_GRID * PIXEL_MOMENTS_GRID;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMethod {
    /// Mean and variance of the channel-averaged image over an 8x8 grid of cells.
    PixelMoments,
    /// Gaussian projection of the flattened pixels, scaled by `1/sqrt(D)`.
    RandomProjection,
}

impl FeatureMethod {
    pub fn name(self) -> &'static str {
        match self {
            FeatureMethod::PixelMoments => "pixel_moments",
            FeatureMethod::RandomProjection => "random_projection",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pixel_moments" => Ok(FeatureMethod::PixelMoments),
            "random_projection" | "seeded_random_projection" => Ok(FeatureMethod::RandomProjection),
            _ => Err(invalid(format!(
                "unknown feature method {s:?}; expected pixel_moments or random_projection"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureSpec {
    pub method: FeatureMethod,
    pub dim: usize,
    pub seed: u64,
    /// Keep the full covariance matrix instead of its diagonal.
    pub full_covariance: bool,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec {
            method: FeatureMethod::PixelMoments,
            dim: PIXEL_MOMENTS_DIM,
            seed: 0,
            full_covariance: false,
        }
    }
}

impl FeatureSpec {
    pub fn validate(&self) -> Result<()> {
        match self.method {
            FeatureMethod::PixelMoments if self.dim != PIXEL_MOMENTS_DIM => Err(invalid(format!(
                "pixel_moments features have dimension {PIXEL_MOMENTS_DIM}, got {}",
                self.dim
            ))),
            _ if self.dim < 2 => Err(invalid("feature dimension must be at least 2")),
            _ => Ok(()),
        }
    }
}

fn pixel_moments(img: &Image) -> Result<Vec<f64>> {
    let (h, w, c) = img.dims();
    let g = PIXEL_MOMENTS_GRID;
    if h < g || w < g {
        return Err(geometry(format!("pixel_moments needs at least {g}x{g} pixels, got {h}x{w}")));
    }
    let gray = |y: usize, x: usize| (0..c).map(|k| img.get(y, x, k)).sum::<f64>() / c as f64;
    let mut out = Vec::with_capacity(PIXEL_MOMENTS_DIM);
    for gy in 0..g {
        for gx in 0..g {
            let (y0, y1) = (gy * h / g, (gy + 1) * h / g);
            let (x0, x1) = (gx * w / g, (gx + 1) * w / g);
            let n = ((y1 - y0) * (x1 - x0)) as f64;
            let vals: Vec<f64> = (y0..y1).flat_map(|y| (x0..x1).map(move |x| (y, x))).map(|(y, x)| gray(y, x)).collect();
            let m = vals.iter().sum::<f64>() / n;
            let v = vals.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / n;
            out.push(m);
            out.push(v);
        }
    }
    Ok(out)
}

/// Rows of the projection matrix are drawn in order from one seeded stream.
fn projection(dim: usize, inputs: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = 1.0 / (inputs as f64).sqrt();
    (0..dim * inputs)
        .map(|_| {
            let e: f64 = StandardNormal.sample(&mut rng);
            e * s
        })
        .collect()
}

/// Feature vectors, one per image.
pub fn features(images: &[Image], spec: &FeatureSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let dims = images.first().ok_or_else(|| invalid("no images"))?.dims();
    if let Some(i) = images.iter().position(|m| m.dims() != dims) {
        return Err(geometry(format!("image {i} is {:?}, expected {dims:?}", images[i].dims())));
    }
    match spec.method {
        FeatureMethod::PixelMoments => images.iter().map(pixel_moments).collect(),
        FeatureMethod::RandomProjection => {
            let d_in = images[0].len();
            let p = projection(spec.dim, d_in, spec.seed);
            Ok(images
                .iter()
                .map(|img| {
                    p.chunks_exact(d_in)
                        .map(|row| row.iter().zip(img.data()).map(|(a, b)| a * b).sum())
                        .collect()
                })
                .collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Diagonal(Vec<f64>),
    /// Row-major `d x d`.
    Full(Vec<f64>),
}

/// Gaussian summary of a feature set; covariance uses the `n - 1` divisor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub covariance: Covariance,
    pub count: usize,
}

impl FeatureStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn full_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        match &self.covariance {
            Covariance::Diagonal(v) => DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(v)),
            Covariance::Full(m) => DMatrix::from_row_slice(d, d, m),
        }
    }
}

/// Two-pass mean and covariance of feature vectors.
pub fn feature_stats(feats: &[Vec<f64>], full: bool) -> Result<FeatureStats> {
    let n = feats.len();
    if n < 2 {
        return Err(invalid(format!("feature statistics need at least 2 samples, got {n}")));
    }
    let d = feats[0].len();
    let mut mean = vec![0.0; d];
    for f in feats {
        for (m, v) in mean.iter_mut().zip(f) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centred: Vec<Vec<f64>> = feats
        .iter()
        .map(|f| f.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();
    let denom = (n - 1) as f64;
    let covariance = if full {
        let mut c = vec![0.0; d * d];
        for f in &centred {
            for i in 0..d {
                for j in i..d {
                    c[i * d + j] += f[i] * f[j];
                }
            }
        }
        for i in 0..d {
            for j in i..d {
                let v = c[i * d + j] / denom;
                c[i * d + j] = v;
                c[j * d + i] = v;
            }
        }
        Covariance::Full(c)
    } else {
        let mut c = vec![0.0; d];
        for f in &centred {
            for (a, v) in c.iter_mut().zip(f) {
                *a += v * v;
            }
        }
        c.iter_mut().for_each(|a| *a /= denom);
        Covariance::Diagonal(c)
    };
    Ok(FeatureStats {
        mean,
        covariance,
        count: n,
    })
}

pub fn extract_features(images: &[Image], spec: &FeatureSpec) -> Result<FeatureStats> {
    if images.len() < 2 {
        return Err(invalid(format!("feature extraction needs at least 2 images, got {}", images.len())));
    }
    feature_stats(&features(images, spec)?, spec.full_covariance)
}

fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = SymmetricEigen::new(m.clone());
    let s = e.eigenvalues.map(|l| l.max(0.0).sqrt());
    &e.eigenvectors * DMatrix::from_diagonal(&s) * e.eigenvectors.transpose()
}

/// `|mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a S_b)^(1/2))`, clamped at 0.
pub fn frechet_distance(a: &FeatureStats, b: &FeatureStats) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(geometry(format!("feature dimensions differ: {} vs {}", a.dim(), b.dim())));
    }
    let mean_term: f64 = a.mean.iter().zip(&b.mean).map(|(x, y)| (x - y) * (x - y)).sum();
    let trace_term = match (&a.covariance, &b.covariance) {
        (Covariance::Diagonal(x), Covariance::Diagonal(y)) => {
            x.iter().zip(y).map(|(p, q)| p + q - 2.0 * (p * q).max(0.0).sqrt()).sum()
        }
        _ => {
            let sa = a.full_matrix();
            let sb = b.full_matrix();
            let r = psd_sqrt(&sa);
            let inner = &r * &sb * &r;
            let inner = (&inner + inner.transpose()) * 0.5;
            let cross: f64 = SymmetricEigen::new(inner)
                .eigenvalues
                .iter()
                .map(|l| l.max(0.0).sqrt())
                .sum();
            sa.trace() + sb.trace() - 2.0 * cross
        }
    };
    Ok((mean_term + trace_term).max(0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub metric: &'static str,
    pub value: f64,
    pub set_a: String,
    pub set_b: String,
    pub n_a: usize,
    pub n_b: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub spec: FeatureSpec,
    pub rows: Vec<ReportRow>,
}

impl EvalReport {
    pub fn get(&self, metric: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.metric == metric).map(|r| r.value)
    }

    /// Columns: metric, value, set_a, set_b, n_a, n_b, feature_method, feature_dim, seed.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,value,set_a,set_b,n_a,n_b,feature_method,feature_dim,seed\n");
        for r in &self.rows {
            let v = if r.value.is_infinite() { "inf".to_string() } else { format!("{:.12e}", r.value) };
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.metric,
                v,
                r.set_a,
                r.set_b,
                r.n_a,
                r.n_b,
                self.spec.method.name(),
                self.spec.dim,
                self.spec.seed
            ));
        }
        s
    }
}

/// FD(generated, real) and, given reconstructions paired with `real`,
/// FD(generated, reconstructions) plus mean MSE and PSNR of the pairs.
pub fn eval_report(
    real: &[Image],
    generated: &[Image],
    reconstructions: Option<&[Image]>,
    spec: &FeatureSpec,
) -> Result<EvalReport> {
    let sr = extract_features(real, spec)?;
    let sg = extract_features(generated, spec)?;
    let row = |metric, value, a: &str, b: &str, n_a, n_b| ReportRow {
        metric,
        value,
        set_a: a.into(),
        set_b: b.into(),
        n_a,
        n_b,
    };
    let mut rows = vec![row("fd", frechet_distance(&sg, &sr)?, "generated", "real", generated.len(), real.len())];
    if let Some(rec) = reconstructions {
        if rec.len() != real.len() {
            return Err(invalid(format!(
                "{} reconstructions for {} originals",
                rec.len(),
                real.len()
            )));
        }
        let sc = extract_features(rec, spec)?;
        rows.push(row(
            "fd_recon",
            frechet_distance(&sg, &sc)?,
            "generated",
            "reconstructions",
            generated.len(),
            rec.len(),
        ));
        let mut m = 0.0;
        let mut p = 0.0;
        for (x, y) in real.iter().zip(rec) {
            m += mse(y, x)?;
            p += psnr(y, x, 1.0)?;
        }
        let n = real.len() as f64;
        rows.push(row("mse", m / n, "reconstructions", "real", rec.len(), real.len()));
        rows.push(row("psnr", p / n, "reconstructions", "real", rec.len(), real.len()));
    }
    Ok(EvalReport { spec: *spec, rows })
}
