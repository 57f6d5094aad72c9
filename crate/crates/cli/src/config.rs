//! `key = value` run configuration.

use std::path::PathBuf;

use nsb_core::metrics::{FeatureMethod, FeatureSpec};
use nsb_core::pyramid::{DEFAULT_BASE_PATCH, DEFAULT_LEVELS};
use nsb_core::recon::{TrainConfig, TrunkConfig};
use nsb_core::wavelet::{make_filter_bank, FilterBank, DEFAULT_WAVELET};

use crate::error::{input, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub wavelet: String,
    pub levels: usize,
    pub base_patch: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub corpus_dir: PathBuf,
    pub output_dir: PathBuf,
    pub feature_method: FeatureMethod,
    pub feature_dim: usize,
    pub full_covariance: bool,
    /// Crop every image to the largest centred power-of-two square.
    pub center_crop: bool,
    pub width: usize,
    pub head_width: usize,
    pub stages: usize,
    pub validate_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let trunk = TrunkConfig::default();
        let train = TrainConfig::default();
        let features = FeatureSpec::default();
        RunConfig {
            wavelet: DEFAULT_WAVELET.to_string(),
            levels: DEFAULT_LEVELS,
            base_patch: DEFAULT_BASE_PATCH,
            seed: 0,
            learning_rate: train.learning_rate,
            batch_size: train.batch_size,
            iterations: train.iterations,
            corpus_dir: PathBuf::from("corpus"),
            output_dir: PathBuf::from("out"),
            feature_method: features.method,
            feature_dim: features.dim,
            full_covariance: false,
            center_crop: false,
            width: trunk.width,
            head_width: trunk.head_width,
            stages: trunk.stages,
            validate_every: train.validate_every,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> CliResult<T> {
    v.parse()
        .map_err(|_| input(format!("config key {key}: cannot parse {v:?}")))
}

fn flag(key: &str, v: &str) -> CliResult<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(input(format!("config key {key}: expected true or false, got {v:?}"))),
    }
}

impl RunConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg = RunConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| input(format!("config line {}: expected key = value", n + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> CliResult<()> {
        match key {
            "wavelet" => self.wavelet = v.to_string(),
            "levels" => self.levels = num(key, v)?,
            "base_patch" => self.base_patch = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "learning_rate" => self.learning_rate = num(key, v)?,
            "batch_size" => self.batch_size = num(key, v)?,
            "iterations" => self.iterations = num(key, v)?,
            "corpus_dir" => self.corpus_dir = PathBuf::from(v),
            "output_dir" => self.output_dir = PathBuf::from(v),
            "feature_method" => self.feature_method = FeatureMethod::parse(v)?,
            "feature_dim" => self.feature_dim = num(key, v)?,
            "full_covariance" => self.full_covariance = flag(key, v)?,
            "center_crop" => self.center_crop = flag(key, v)?,
            "width" => self.width = num(key, v)?,
            "head_width" => self.head_width = num(key, v)?,
            "stages" => self.stages = num(key, v)?,
            "validate_every" => self.validate_every = num(key, v)?,
            _ => return Err(input(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Checks every value before any work starts.
    pub fn validate(&self) -> CliResult<()> {
        self.filter_bank()?;
        if self.levels == 0 || self.levels > 16 {
            return Err(input(format!("levels must lie in 1..=16, got {}", self.levels)));
        }
        if self.base_patch == 0 {
            return Err(input("base_patch must be positive"));
        }
        if self.width == 0 || self.head_width == 0 || self.stages > 8 {
            return Err(input("width and head_width must be positive, stages at most 8"));
        }
        self.train_config().validate()?;
        self.feature_spec().validate()?;
        Ok(())
    }

    pub fn filter_bank(&self) -> CliResult<FilterBank> {
        Ok(make_filter_bank(&self.wavelet)?)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            iterations: self.iterations,
            seed: self.seed,
            validate_every: self.validate_every,
            ..TrainConfig::default()
        }
    }

    pub fn trunk(&self) -> TrunkConfig {
        TrunkConfig {
            width: self.width,
            head_width: self.head_width,
            stages: self.stages,
        }
    }

    pub fn feature_spec(&self) -> FeatureSpec {
        FeatureSpec {
            method: self.feature_method,
            dim: self.feature_dim,
            seed: self.seed,
            full_covariance: self.full_covariance,
        }
    }
}
