//! Experiment configuration and its flat key-value file format.
//!
//! Configs serialize to a diff-friendly `key = value` text file. Every key
//! can be overridden by the CLI flag of the same name, and a config written
//! by [`ExperimentConfig::to_file_string`] parses back to an identical
//! value.

use std::path::{Path, PathBuf};

use crate::cv::Strategy;
use crate::data::AugmentPolicy;
use crate::error::{Error, Result};
use crate::optim::AdamWConfig;

/// Numeric mode of a run. `F64Check` runs the 64-bit finite-difference
/// gradient self-check before training starts; training itself is f32.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64Check,
}

impl std::fmt::Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Precision::F32 => write!(f, "f32"),
            Precision::F64Check => write!(f, "f64-check"),
        }
    }
}

impl std::str::FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64-check" => Ok(Precision::F64Check),
            other => Err(Error::Config(format!(
                "unknown precision '{other}' (expected f32 or f64-check)"
            ))),
        }
    }
}

/// Everything a training run needs. Class count and names are derived from
/// the dataset, not configured.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub data: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub folds: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f32,
    pub dropout: f32,
    pub leaky_slope: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
    pub weight_decay: f32,
    pub augment: bool,
    pub strategy: Strategy,
    pub precision: Precision,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: PathBuf::new(),
            out: PathBuf::from("runs/default"),
            seed: 42,
            folds: 10,
            epochs: 30,
            batch_size: 32,
            lr: 0.001,
            dropout: 0.5,
            leaky_slope: crate::nn::DEFAULT_LEAKY_SLOPE,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.004,
            augment: true,
            strategy: Strategy::Stratified,
            precision: Precision::F32,
        }
    }
}

impl ExperimentConfig {
    /// Canonical file form; floats use Rust's shortest round-trip notation.
    pub fn to_file_string(&self) -> String {
        format!(
            "data = {}\n\
             out = {}\n\
             seed = {}\n\
             folds = {}\n\
             epochs = {}\n\
             batch_size = {}\n\
             lr = {}\n\
             dropout = {}\n\
             leaky_slope = {}\n\
             beta1 = {}\n\
             beta2 = {}\n\
             epsilon = {}\n\
             weight_decay = {}\n\
             augment = {}\n\
             strategy = {}\n\
             precision = {}\n",
            self.data.display(),
            self.out.display(),
            self.seed,
            self.folds,
            self.epochs,
            self.batch_size,
            self.lr,
            self.dropout,
            self.leaky_slope,
            self.beta1,
            self.beta2,
            self.epsilon,
            self.weight_decay,
            self.augment,
            self.strategy,
            self.precision,
        )
    }

    /// Parse `key = value` lines over the defaults. `#` starts a comment;
    /// unknown keys are errors.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value', got '{raw}'", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(cfg)
    }

    /// Set one field by its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value '{value}' for key '{key}'")))
        }
        match key {
            "data" => self.data = PathBuf::from(value),
            "out" => self.out = PathBuf::from(value),
            "seed" => self.seed = num(key, value)?,
            "folds" => self.folds = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "lr" => self.lr = num(key, value)?,
            "dropout" => self.dropout = num(key, value)?,
            "leaky_slope" => self.leaky_slope = num(key, value)?,
            "beta1" => self.beta1 = num(key, value)?,
            "beta2" => self.beta2 = num(key, value)?,
            "epsilon" => self.epsilon = num(key, value)?,
            "weight_decay" => self.weight_decay = num(key, value)?,
            "augment" => self.augment = num(key, value)?,
            "strategy" => self.strategy = value.parse()?,
            "precision" => self.precision = value.parse()?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_file_string()).map_err(|e| Error::io(path, e))
    }

    /// Range-check every numeric field.
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(what.to_string()))
            }
        };
        check(self.folds >= 2, "folds must be at least 2")?;
        check(self.epochs >= 1, "epochs must be at least 1")?;
        check(self.batch_size >= 1, "batch_size must be at least 1")?;
        check(self.lr > 0.0 && self.lr.is_finite(), "lr must be positive")?;
        check((0.0..1.0).contains(&self.dropout), "dropout must be in [0, 1)")?;
        check(self.leaky_slope > 0.0, "leaky_slope must be positive")?;
        check((0.0..1.0).contains(&self.beta1), "beta1 must be in [0, 1)")?;
        check((0.0..1.0).contains(&self.beta2), "beta2 must be in [0, 1)")?;
        check(self.epsilon > 0.0, "epsilon must be positive")?;
        check(self.weight_decay >= 0.0, "weight_decay must be non-negative")?;
        Ok(())
    }

    pub fn adamw(&self) -> AdamWConfig {
        AdamWConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            weight_decay: self.weight_decay,
        }
    }

    pub fn augment_policy(&self) -> AugmentPolicy {
        let mut policy = AugmentPolicy::default();
        policy.enabled = self.augment;
        policy
    }
}
