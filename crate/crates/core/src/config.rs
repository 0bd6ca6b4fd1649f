//! Run configuration: TOML file + programmatic overrides, and the config
//! hash embedded in every artifact.

use crate::arm::ArmConfig;
use crate::error::{Error, Result};
use crate::model::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

/// Which learned model a `train`/`eval` run concerns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Mmvae,
    Vanilla,
    VanillaAug,
    Fwdinv,
}

impl ModelKind {
    pub fn parse(s: &str) -> Result<ModelKind> {
        match s {
            "mmvae" => Ok(ModelKind::Mmvae),
            "vanilla" => Ok(ModelKind::Vanilla),
            "vanilla-aug" => Ok(ModelKind::VanillaAug),
            "fwdinv" => Ok(ModelKind::Fwdinv),
            other => Err(Error::Config(format!(
                "unknown model {:?} (expected mmvae|vanilla|vanilla-aug|fwdinv)",
                other
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Mmvae => "mmvae",
            ModelKind::Vanilla => "vanilla",
            ModelKind::VanillaAug => "vanilla-aug",
            ModelKind::Fwdinv => "fwdinv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainingProfile {
    Desk,
    PaperScale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetParams {
    pub rows: usize,
    pub split_ratio: f64,
}

impl Default for DatasetParams {
    fn default() -> Self {
        DatasetParams {
            rows: 7380,
            split_ratio: 0.8,
        }
    }
}

/// Optional overrides applied on top of the selected training profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct TrainOverrides {
    pub steps: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub final_learning_rate: Option<f64>,
    pub beta: Option<f64>,
}

impl TrainOverrides {
    pub fn apply(&self, config: &mut TrainConfig) {
        if let Some(steps) = self.steps {
            config.steps = steps;
        }
        if let Some(batch_size) = self.batch_size {
            config.batch_size = batch_size;
        }
        if let Some(lr) = self.learning_rate {
            config.learning_rate = lr;
        }
        if let Some(lr) = self.final_learning_rate {
            config.final_learning_rate = lr;
        }
        if let Some(beta) = self.beta {
            config.beta = beta;
        }
    }
}

/// Everything a run needs; serialized into every report for byte-for-byte
/// reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub arm: ArmConfig,
    pub dataset: DatasetParams,
    pub profile: TrainingProfile,
    pub model: ModelKind,
    pub train: TrainOverrides,
    pub output_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 7,
            arm: ArmConfig::default(),
            dataset: DatasetParams::default(),
            profile: TrainingProfile::Desk,
            model: ModelKind::Mmvae,
            train: TrainOverrides::default(),
            output_dir: default_output_dir(),
        }
    }
}

/// `MMVAE_OUT` overrides the default `./out` artifact directory.
pub fn default_output_dir() -> String {
    std::env::var("MMVAE_OUT").unwrap_or_else(|_| "out".to_string())
}

impl RunConfig {
    pub fn from_toml_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Format {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        toml::from_str(&text).map_err(|e| Error::Config(format!(
            "{}: {}",
            path.display(),
            e
        )))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn train_config(&self) -> TrainConfig {
        let mut config = match self.profile {
            TrainingProfile::Desk => TrainConfig::desk(self.seed),
            TrainingProfile::PaperScale => TrainConfig::paper_scale(self.seed),
        };
        self.train.apply(&mut config);
        config
    }

    /// Hash embedded in artifacts; covers every field that affects the
    /// produced data.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        hex::encode(&hasher.finalize()[..8])
    }
}
