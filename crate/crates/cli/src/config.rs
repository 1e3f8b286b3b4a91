//! Run configuration: one JSON file per run, overridable by flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use kge_core::eval::EvalMode;
use kge_core::models::{ModelKind, ModelSpec, Norm};
use kge_core::split::SplitConfig;
use kge_core::train::{GridSpec, LossKind, OptimizerKind, TrainConfig};
use kge_core::triples::ViewTag;

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetFile {
    pub path: PathBuf,
    /// View assigned to this file's rows; `whole` keeps per-row tags from a
    /// fourth column.
    #[serde(default = "default_view_whole")]
    pub view: ViewTag,
}

fn default_view_whole() -> ViewTag {
    ViewTag::Whole
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct DatasetConfig {
    pub files: Vec<DatasetFile>,
    #[serde(default)]
    pub type_map: Option<PathBuf>,
    #[serde(default)]
    pub header: bool,
    #[serde(default)]
    pub delimiter: Option<char>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub norm: Norm,
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
}

fn default_dim() -> usize {
    512
}

fn default_init_scale() -> f64 {
    1e-3
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: ModelKind::TransE,
            dim: default_dim(),
            norm: Norm::default(),
            init_scale: default_init_scale(),
        }
    }
}

impl ModelConfig {
    pub fn spec(&self) -> ModelSpec {
        ModelSpec { kind: self.kind, dim: self.dim, norm: self.norm, init_scale: self.init_scale }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub negative_ratio: Option<usize>,
    pub max_epochs: usize,
    pub patience: usize,
    pub optimizer: Option<OptimizerKind>,
    pub symmetric_negatives: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            batch_size: 512,
            learning_rate: 1e-3,
            negative_ratio: Some(50),
            max_epochs: 1000,
            patience: 5,
            optimizer: None,
            symmetric_negatives: false,
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self, kind: ModelKind, seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            negative_ratio: self.negative_ratio,
            max_epochs: self.max_epochs,
            patience: self.patience,
            loss: if self.negative_ratio.is_some() { LossKind::Bce } else { LossKind::Nll },
            optimizer: self.optimizer.unwrap_or_else(|| OptimizerKind::default_for(kind)),
            symmetric_negatives: self.symmetric_negatives,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSection {
    pub holdout_fraction: f64,
    pub min_component_size: usize,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection { holdout_fraction: 0.20, min_component_size: 10 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct GridSection {
    pub batch_sizes: Option<Vec<usize>>,
    pub learning_rates: Option<Vec<f64>>,
    pub negative_ratios: Option<Vec<Option<usize>>>,
}

impl GridSection {
    pub fn to_grid_spec(&self) -> GridSpec {
        let base = GridSpec::benchmark_grid();
        GridSpec {
            batch_sizes: self.batch_sizes.clone().unwrap_or(base.batch_sizes),
            learning_rates: self.learning_rates.clone().unwrap_or(base.learning_rates),
            negative_ratios: self.negative_ratios.clone().unwrap_or(base.negative_ratios),
        }
    }
}

/// The per-run configuration file.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub view: Option<ViewTag>,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub split: SplitSection,
    pub grid: GridSection,
    pub eval_mode: EvalMode,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(RunConfig, String), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        let digest = {
            use sha2::{Digest, Sha256};
            hex::encode(Sha256::digest(text.as_bytes()))
        };
        Ok((cfg, digest))
    }

    pub fn split_config(&self) -> SplitConfig {
        SplitConfig {
            holdout_fraction: self.split.holdout_fraction,
            min_component_size: self.split.min_component_size,
            seed: self.seed,
        }
    }
}
