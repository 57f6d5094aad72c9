//! Python bindings. Images cross the boundary as `Image` objects holding
//! row-major HWC `float` data; containers cross as `bytes`.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use nsb_core::corpus::{toy_corpus as core_toy_corpus, ToyCorpusConfig, TOY_CLASSES};
use nsb_core::metrics::{self, FeatureMethod, FeatureSpec};
use nsb_core::pyramid::{self, BandPredictor, LevelGeometry};
use nsb_core::recon::{self, TrainConfig, TrunkConfig};
use nsb_core::wavelet::{self, make_filter_bank, FilterBank, QuadDecomposition};
use nsb_core::{pixel, ppm, prior};

fn err(e: impl Into<nsb_core::Error>) -> PyErr {
    match e.into() {
        nsb_core::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn bank(name: &str) -> PyResult<FilterBank> {
    make_filter_bank(name).map_err(err)
}

#[pyclass(name = "Image", module = "nsb", from_py_object)]
#[derive(Clone)]
struct PyImage(nsb_core::Image);

#[pymethods]
impl PyImage {
    #[new]
    fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> PyResult<Self> {
        nsb_core::Image::new(height, width, channels, data).map(PyImage).map_err(err)
    }

    #[staticmethod]
    fn zeros(height: usize, width: usize, channels: usize) -> Self {
        PyImage(nsb_core::Image::zeros(height, width, channels))
    }

    #[staticmethod]
    fn read_ppm(path: &str) -> PyResult<Self> {
        ppm::read_ppm(path.as_ref()).map(PyImage).map_err(err)
    }

    fn write_ppm(&self, path: &str) -> PyResult<()> {
        ppm::write_ppm(path.as_ref(), &self.0).map_err(err)
    }

    /// `(height, width, channels)`.
    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        self.0.dims()
    }

    #[getter]
    fn data(&self) -> Vec<f64> {
        self.0.data().to_vec()
    }

    fn get(&self, y: usize, x: usize, c: usize) -> PyResult<f64> {
        let (h, w, ch) = self.0.dims();
        if y >= h || x >= w || c >= ch {
            return Err(PyValueError::new_err("index out of range"));
        }
        Ok(self.0.get(y, x, c))
    }

    fn max_abs_diff(&self, other: &PyImage) -> PyResult<f64> {
        if !self.0.same_dims(&other.0) {
            return Err(PyValueError::new_err("image shapes differ"));
        }
        Ok(self.0.max_abs_diff(&other.0))
    }

    fn __repr__(&self) -> String {
        let (h, w, c) = self.0.dims();
        format!("Image({h}x{w}x{c})")
    }
}

fn unwrap_images(images: Vec<PyImage>) -> Vec<nsb_core::Image> {
    images.into_iter().map(|i| i.0).collect()
}

/// One analysis level: `(tl, tr, bl, br)`.
#[pyfunction]
#[pyo3(signature = (image, wavelet = "bior2.2"))]
fn dwt2d(image: &PyImage, wavelet: &str) -> PyResult<(PyImage, PyImage, PyImage, PyImage)> {
    let q = wavelet::dwt2d(&image.0, &bank(wavelet)?).map_err(err)?;
    Ok((PyImage(q.tl), PyImage(q.tr), PyImage(q.bl), PyImage(q.br)))
}

#[pyfunction]
#[pyo3(signature = (tl, tr, bl, br, wavelet = "bior2.2"))]
fn idwt2d(tl: PyImage, tr: PyImage, bl: PyImage, br: PyImage, wavelet: &str) -> PyResult<PyImage> {
    let q = QuadDecomposition::new(tl.0, tr.0, bl.0, br.0).map_err(err)?;
    wavelet::idwt2d(&q, &bank(wavelet)?).map(PyImage).map_err(err)
}

#[pyclass(name = "PyramidCode", module = "nsb", from_py_object)]
#[derive(Clone)]
struct PyCode(pyramid::PyramidCode);

#[pymethods]
impl PyCode {
    #[getter]
    fn levels(&self) -> usize {
        self.0.levels
    }

    #[getter]
    fn wavelet(&self) -> String {
        self.0.wavelet_name.clone()
    }

    #[getter]
    fn latent(&self) -> PyImage {
        PyImage(self.0.tl.clone())
    }

    #[getter]
    fn original_shape(&self) -> (usize, usize, usize) {
        (self.0.original_height, self.0.original_width, self.0.channels)
    }

    fn compression_ratio(&self) -> usize {
        self.0.compression_ratio()
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let b = pyramid::serialize_code(&self.0).map_err(err)?;
        Ok(PyBytes::new(py, &b))
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        pyramid::deserialize_code(data).map(PyCode).map_err(err)
    }
}

#[pyfunction]
#[pyo3(signature = (image, levels = 2, wavelet = "bior2.2"))]
fn encode(image: &PyImage, levels: usize, wavelet: &str) -> PyResult<PyCode> {
    pyramid::encode(&image.0, levels, &bank(wavelet)?).map(PyCode).map_err(err)
}

/// Decodes with every detail band set to zero.
#[pyfunction]
fn decode_low_pass(code: &PyCode) -> PyResult<PyImage> {
    let fb = bank(&code.0.wavelet_name)?;
    pyramid::low_pass_decode(&code.0, &fb).map(PyImage).map_err(err)
}

/// Decodes with the true detail bands of `truth`.
#[pyfunction]
#[pyo3(signature = (code, truth, base_patch = 32))]
fn decode_oracle(code: &PyCode, truth: &PyImage, base_patch: usize) -> PyResult<PyImage> {
    let fb = bank(&code.0.wavelet_name)?;
    let quads = pyramid::full_decompose(&truth.0, code.0.levels, &fb).map_err(err)?;
    let oracles = quads
        .iter()
        .map(|q| pyramid::OraclePredictor::new(q, base_patch.min(q.tl.height()), &fb))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let refs: Vec<&dyn BandPredictor> = oracles.iter().map(|o| o as &dyn BandPredictor).collect();
    pyramid::decode(&code.0, &refs, &fb).map(PyImage).map_err(err)
}

#[pyclass(name = "DecoderModel", module = "nsb", from_py_object)]
#[derive(Clone)]
struct PyDecoder(recon::DecoderModel);

#[pymethods]
impl PyDecoder {
    #[new]
    #[pyo3(signature = (level, band_extent, channels = 3, base_patch = 32, width = 16, head_width = 16, stages = 1, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        level: usize,
        band_extent: usize,
        channels: usize,
        base_patch: usize,
        width: usize,
        head_width: usize,
        stages: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let g = LevelGeometry::new(band_extent, base_patch, channels).map_err(err)?;
        let trunk = TrunkConfig {
            width,
            head_width,
            stages,
        };
        recon::DecoderModel::build(level, g, trunk, seed).map(PyDecoder).map_err(err)
    }

    #[getter]
    fn level(&self) -> usize {
        self.0.level
    }

    #[getter]
    fn head_count(&self) -> usize {
        self.0.head_count()
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.0.net().param_count()
    }

    /// Trains on the level datasets of `images` for `wavelet`; returns the
    /// per-iteration training MSE.
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (images, wavelet = "bior2.2", iterations = 100, learning_rate = 1e-3, batch_size = 16, seed = 0))]
    fn fit(
        &mut self,
        py: Python<'_>,
        images: Vec<PyImage>,
        wavelet: &str,
        iterations: usize,
        learning_rate: f64,
        batch_size: usize,
        seed: u64,
    ) -> PyResult<Vec<f64>> {
        let fb = bank(wavelet)?;
        let images = unwrap_images(images);
        let level = self.0.level;
        let cfg = TrainConfig {
            learning_rate,
            batch_size,
            iterations,
            seed,
            ..TrainConfig::default()
        };
        let model = self.0.clone();
        let trained = py
            .detach(move || {
                let ds = pyramid::build_level_datasets(&images, level, &fb)?.remove(level - 1);
                recon::train_decoder(model, &ds, None, &cfg, &fb).map_err(|e| match e {
                    recon::TrainError::Setup(e) => e,
                    recon::TrainError::Diverged { cause, .. } => cause,
                })
            })
            .map_err(err)?;
        self.0 = trained.model;
        Ok(trained.history.iter().map(|r| r.train_mse).collect())
    }

    fn save<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let b = self.0.save().map_err(err)?;
        Ok(PyBytes::new(py, &b))
    }

    #[staticmethod]
    fn load(data: &[u8], level: usize) -> PyResult<Self> {
        recon::DecoderModel::load(data, level).map(PyDecoder).map_err(err)
    }
}

/// Decodes with one trained model per level, `models[l - 1]` serving level `l`.
#[pyfunction]
fn decode(code: &PyCode, models: Vec<PyDecoder>) -> PyResult<PyImage> {
    let fb = bank(&code.0.wavelet_name)?;
    let refs: Vec<&dyn BandPredictor> = models.iter().map(|m| &m.0 as &dyn BandPredictor).collect();
    pyramid::decode(&code.0, &refs, &fb).map(PyImage).map_err(err)
}

#[pyclass(name = "Sampler", module = "nsb", from_py_object)]
#[derive(Clone)]
struct PySampler(prior::SamplerModel);

#[pymethods]
impl PySampler {
    #[staticmethod]
    fn fit(latents: Vec<PyImage>, labels: Vec<usize>) -> PyResult<Self> {
        prior::fit_sampler(&unwrap_images(latents), &labels).map(PySampler).map_err(err)
    }

    #[getter]
    fn class_count(&self) -> usize {
        self.0.class_count()
    }

    fn mean(&self, class: usize) -> Option<Vec<f64>> {
        self.0.mean(class).map(<[f64]>::to_vec)
    }

    fn variance(&self, class: usize) -> Option<Vec<f64>> {
        self.0.variance(class).map(<[f64]>::to_vec)
    }

    #[pyo3(signature = (class_, n, truncation = 1.0, seed = 0))]
    fn sample(&self, class_: usize, n: usize, truncation: f64, seed: u64) -> PyResult<Vec<PyImage>> {
        let t = prior::TruncationLevel::new(truncation).map_err(err)?;
        let v = prior::sample(&self.0, class_, t, n, seed).map_err(err)?;
        Ok(v.into_iter().map(PyImage).collect())
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let b = prior::serialize_sampler(&self.0).map_err(err)?;
        Ok(PyBytes::new(py, &b))
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        prior::deserialize_sampler(data).map(PySampler).map_err(err)
    }
}

#[pyfunction]
fn mse(a: &PyImage, b: &PyImage) -> PyResult<f64> {
    metrics::mse(&a.0, &b.0).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (a, b, peak = 1.0))]
fn psnr(a: &PyImage, b: &PyImage, peak: f64) -> PyResult<f64> {
    metrics::psnr(&a.0, &b.0, peak).map_err(err)
}

/// Fréchet distance between Gaussian summaries of two image sets' features.
#[pyfunction]
#[pyo3(signature = (a, b, method = "pixel_moments", dim = 128, seed = 0, full_covariance = false))]
fn frechet_distance(
    a: Vec<PyImage>,
    b: Vec<PyImage>,
    method: &str,
    dim: usize,
    seed: u64,
    full_covariance: bool,
) -> PyResult<f64> {
    let spec = FeatureSpec {
        method: FeatureMethod::parse(method).map_err(err)?,
        dim,
        seed,
        full_covariance,
    };
    let sa = metrics::extract_features(&unwrap_images(a), &spec).map_err(err)?;
    let sb = metrics::extract_features(&unwrap_images(b), &spec).map_err(err)?;
    metrics::frechet_distance(&sa, &sb).map_err(err)
}

#[pyfunction]
fn bilinear_downsample(image: &PyImage, factor: usize) -> PyResult<PyImage> {
    pixel::bilinear_downsample(&image.0, factor).map(PyImage).map_err(err)
}

#[pyfunction]
fn bilinear_upsample(image: &PyImage, factor: usize) -> PyResult<PyImage> {
    pixel::bilinear_upsample(&image.0, factor).map(PyImage).map_err(err)
}

/// `(class_index, name, image)` triples of the seeded synthetic corpus.
#[pyfunction]
#[pyo3(signature = (per_class = 32, extent = 64, seed = 0))]
fn toy_corpus(per_class: usize, extent: usize, seed: u64) -> PyResult<Vec<(usize, String, PyImage)>> {
    let cfg = ToyCorpusConfig {
        per_class,
        extent,
        seed,
        ..ToyCorpusConfig::default()
    };
    let v = core_toy_corpus(&cfg).map_err(err)?;
    Ok(v.into_iter().map(|t| (t.class, t.name, PyImage(t.image))).collect())
}

#[pymodule]
fn nsb(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImage>()?;
    m.add_class::<PyCode>()?;
    m.add_class::<PyDecoder>()?;
    m.add_class::<PySampler>()?;
    m.add("TOY_CLASSES", TOY_CLASSES.to_vec())?;
    m.add("WAVELETS", wavelet::SUPPORTED_WAVELETS.to_vec())?;
    for f in [
        wrap_pyfunction!(dwt2d, m)?,
        wrap_pyfunction!(idwt2d, m)?,
        wrap_pyfunction!(encode, m)?,
        wrap_pyfunction!(decode, m)?,
        wrap_pyfunction!(decode_low_pass, m)?,
        wrap_pyfunction!(decode_oracle, m)?,
        wrap_pyfunction!(mse, m)?,
        wrap_pyfunction!(psnr, m)?,
        wrap_pyfunction!(frechet_distance, m)?,
        wrap_pyfunction!(bilinear_downsample, m)?,
        wrap_pyfunction!(bilinear_upsample, m)?,
        wrap_pyfunction!(toy_corpus, m)?,
    ] {
        m.add_function(f)?;
    }
    Ok(())
}
