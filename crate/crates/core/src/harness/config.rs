use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelConfig, Variant};
use crate::preprocess::PreprocConfig;
use crate::spectral::SpectralConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preproc: PreprocConfig,
    pub spectral: SpectralConfig,
    pub model: ModelConfig,
    pub variant: Variant,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Epochs without validation-loss improvement before stopping.
    pub early_stop_patience: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            preproc: PreprocConfig::default(),
            spectral: SpectralConfig::default(),
            model: ModelConfig::default(),
            variant: Variant::Bi,
            epochs: 200,
            batch_size: 16,
            learning_rate: 1e-3,
            seed: 0,
            early_stop_patience: 30,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!("learning_rate {} must be positive", self.learning_rate)));
        }
        self.model.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
