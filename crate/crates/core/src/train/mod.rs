//! Negative-sampling training with Adam-family updates, early stopping, and
//! beam hyperparameter search.

mod fit;
mod grid;
mod loss;
mod negative;
mod optimizer;

pub use fit::{fit, EpochRecord, TrainedModel};
pub use grid::{beam_search, grid_search, GridResult, GridSpec, GridStage};
pub use loss::{loss, LossKind};
pub use negative::{sample_negatives, sample_negatives_symmetric};
pub use optimizer::{AdamState, OptimizerKind};

use serde::{Deserialize, Serialize};

use crate::eval::EvalError;
use crate::models::{ModelError, ModelKind, ParamRef};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("empty training set")]
    EmptyTrainSet,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("loss shape mismatch: {0}")]
    LossShape(String),
    #[error("loss kind {kind:?} inconsistent with negative ratio {ratio:?}")]
    LossRatioMismatch { kind: LossKind, ratio: Option<usize> },
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("non-finite gradient for parameter row {param:?}")]
    NonFiniteGradient { param: ParamRef },
    #[error("hyperparameter grid has an empty stage")]
    EmptyGrid,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Training hyperparameters. The benchmark grid sweeps batch size
/// {512, 1024, 2048}, learning rate {1e-4, 5e-4, 1e-3, 1e-2, 1e-1}, and
/// negative ratio {None, 5, 25, 50, 100, 125, 150, 250}; `None` trains with
/// the full-softmax objective instead of sampled negatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub negative_ratio: Option<usize>,
    pub max_epochs: usize,
    pub patience: usize,
    pub loss: LossKind,
    pub optimizer: OptimizerKind,
    /// Corrupt heads as well as tails when sampling negatives (training
    /// defaults to tail corruption only).
    #[serde(default)]
    pub symmetric_negatives: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 512,
            learning_rate: 1e-3,
            negative_ratio: Some(50),
            max_epochs: 1000,
            patience: 5,
            loss: LossKind::Bce,
            optimizer: OptimizerKind::Adam,
            symmetric_negatives: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Reject unusable settings and loss kinds inconsistent with the ratio
    /// regime.
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(TrainError::InvalidConfig("learning rate must be positive".into()));
        }
        if self.patience == 0 {
            return Err(TrainError::InvalidConfig("patience must be at least 1".into()));
        }
        match (self.loss, self.negative_ratio) {
            (LossKind::Bce, Some(_)) | (LossKind::Nll, None) => Ok(()),
            (kind, ratio) => Err(TrainError::LossRatioMismatch { kind, ratio }),
        }
    }

    /// Derive the loss kind from the ratio (numeric ratio trains with
    /// sampled-negative BCE, `None` with full-softmax NLL).
    pub fn with_ratio(mut self, ratio: Option<usize>) -> Self {
        self.negative_ratio = ratio;
        self.loss = if ratio.is_some() { LossKind::Bce } else { LossKind::Nll };
        self
    }
}

impl OptimizerKind {
    /// The benchmark protocol pairs complex-space models with the sparse
    /// Adam variant and everything else with dense Adam.
    pub fn default_for(kind: ModelKind) -> OptimizerKind {
        if kind.is_complex() {
            OptimizerKind::SparseAdam
        } else {
            OptimizerKind::Adam
        }
    }
}
