//! Full-precision JSON checkpoint written by `train` and read by `export`.

use std::fs;
use std::path::Path;

use kosm_core::bundle::{Metadata, ModelBundle, FORMAT_VERSION};
use kosm_core::dataset::SplitSpec;
use kosm_core::encoding::FeatureEncoder;
use kosm_core::neuralnet::{ArchSpec, DenseLayer, MlpModel, NetError, TrainConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CHECKPOINT_FORMAT: &str = "kosm-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid checkpoint JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported checkpoint {format:?} version {version}")]
    Unsupported { format: String, version: u32 },
    #[error("checkpoint layers do not form a valid model: {0}")]
    Model(#[from] NetError),
    #[error("checkpoint arch {declared} does not match its layers ({actual})")]
    ArchMismatch { declared: String, actual: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub arch: ArchSpec,
    pub training_seed: u64,
    pub split: SplitSpec,
    pub config: TrainConfig,
    pub train_mae: f64,
    pub val_mae: f64,
    pub facility_catalog: Vec<String>,
    pub encoder: FeatureEncoder,
    pub layers: Vec<DenseLayer>,
}

impl Checkpoint {
    pub fn new(
        model: &MlpModel,
        encoder: &FeatureEncoder,
        config: TrainConfig,
        split: SplitSpec,
        (train_mae, val_mae): (f64, f64),
        facility_catalog: Vec<String>,
    ) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            arch: model.arch.clone(),
            training_seed: config.seed,
            split,
            config,
            train_mae,
            val_mae,
            facility_catalog,
            encoder: encoder.clone(),
            layers: model.layers.clone(),
        }
    }

    pub fn model(&self) -> Result<MlpModel, CheckpointError> {
        let model = MlpModel::from_layers(self.layers.clone())?;
        if model.arch != self.arch {
            return Err(CheckpointError::ArchMismatch {
                declared: self.arch.summary(),
                actual: model.arch.summary(),
            });
        }
        Ok(model)
    }

    pub fn to_bundle(&self, created_unix: u64) -> Result<ModelBundle, CheckpointError> {
        let model = self.model()?;
        let metadata = Metadata {
            format_version: FORMAT_VERSION,
            created_unix,
            training_seed: self.training_seed,
            arch_summary: model.arch.summary(),
            train_mae: self.train_mae,
            val_mae: self.val_mae,
        };
        Ok(ModelBundle::new(
            self.encoder.clone(),
            model,
            metadata,
            self.facility_catalog.clone(),
        )?)
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Unsupported {
                format: ckpt.format,
                version: ckpt.version,
            });
        }
        ckpt.model()?;
        Ok(ckpt)
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let text = fs::read_to_string(path).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}
