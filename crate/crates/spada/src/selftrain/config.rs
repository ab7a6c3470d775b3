//! Training configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{FuelClass, NUM_CLASSES};

/// Knobs of the self-training engine. Loadable from JSON or TOML; every
/// field has a default so config files only name what they change.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct TrainConfig {
    /// Weight of the point-annotation loss term.
    pub lambda: f64,
    /// Confidence threshold for pseudo-labels.
    pub tau: f64,
    /// EMA decay of the teacher.
    pub alpha: f64,
    pub base_lr: f64,
    pub weight_decay: f64,
    pub warmup_iters: u64,
    pub total_iters: u64,
    pub poly_power: f64,
    /// Per-class loss weights indexed by class id; the `Ignored` entry
    /// must be zero. When absent they are derived from scribble
    /// frequencies.
    pub class_weights: Option<Vec<f64>>,
    pub seed: u64,
    pub batch_size: usize,
    /// Square crop size sampled from each training scene; must be
    /// divisible by the model stride.
    pub tile_size: usize,
    /// Encoder channel widths; one entry per level.
    pub widths: Vec<usize>,
    /// Disable to train on scribbles alone (no teacher pseudo-labels).
    pub mixing: bool,
    /// Apply class weights to the point loss as well as the scribble loss.
    pub weighted_point_loss: bool,
    pub augment: bool,
    pub val_interval: u64,
    pub log_interval: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            tau: 0.968,
            alpha: 0.999,
            base_lr: 6e-5,
            weight_decay: 0.01,
            warmup_iters: 1500,
            total_iters: 40_000,
            poly_power: 1.0,
            class_weights: None,
            seed: 0,
            batch_size: 1,
            tile_size: 64,
            widths: vec![16, 32, 64],
            mixing: true,
            weighted_point_loss: true,
            augment: true,
            val_interval: 250,
            log_interval: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::InvalidConfig(format!("tau {} outside [0, 1]", self.tau)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!(
                "alpha {} outside [0, 1]",
                self.alpha
            )));
        }
        if self.lambda < 0.0 || !self.lambda.is_finite() {
            return Err(Error::InvalidConfig(format!("lambda {}", self.lambda)));
        }
        if self.warmup_iters > self.total_iters {
            return Err(Error::InvalidConfig(format!(
                "warmup {} exceeds total iterations {}",
                self.warmup_iters, self.total_iters
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if self.widths.is_empty() || self.widths.iter().any(|&w| w == 0) {
            return Err(Error::InvalidConfig("invalid channel widths".into()));
        }
        let stride = 1usize << self.widths.len();
        if self.tile_size == 0 || self.tile_size % stride != 0 {
            return Err(Error::InvalidConfig(format!(
                "tile_size {} must be a positive multiple of the model stride {stride}",
                self.tile_size
            )));
        }
        if let Some(weights) = &self.class_weights {
            if weights.len() != NUM_CLASSES {
                return Err(Error::InvalidConfig(format!(
                    "class_weights needs {NUM_CLASSES} entries, got {}",
                    weights.len()
                )));
            }
            if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return Err(Error::InvalidConfig("negative class weight".into()));
            }
            if weights[FuelClass::Ignored.id() as usize] != 0.0 {
                return Err(Error::InvalidConfig(
                    "the Ignored class weight must be zero".into(),
                ));
            }
        }
        Ok(())
    }

    /// Loads JSON (`.json`) or TOML (anything else).
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: TrainConfig = if path.extension().and_then(|e| e.to_str()) == Some("json") {
            serde_json::from_str(&text).map_err(|e| Error::Json {
                path: path.to_path_buf(),
                source: e,
            })?
        } else {
            toml::from_str(&text).map_err(|e| Error::Toml {
                path: path.to_path_buf(),
                source: e,
            })?
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
