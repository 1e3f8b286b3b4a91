//! Beam hyperparameter search: fix the best batch size, then sweep learning
//! rate, then sweep negative ratio — stage sizes add instead of multiplying.

use serde::{Deserialize, Serialize};

use super::{fit, TrainConfig, TrainError};
use crate::models::ModelSpec;
use crate::split::SplitDataset;
use crate::triples::KnowledgeGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridStage {
    BatchSize,
    LearningRate,
    NegativeRatio,
}

/// Value lattice swept by the beam.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub batch_sizes: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub negative_ratios: Vec<Option<usize>>,
}

impl GridSpec {
    /// The benchmark grid: 3 batch sizes, 5 learning rates, 8 ratios —
    /// 16 beam evaluations instead of a 120-cell cross product.
    pub fn benchmark_grid() -> Self {
        GridSpec {
            batch_sizes: vec![512, 1024, 2048],
            learning_rates: vec![1e-4, 5e-4, 1e-3, 1e-2, 1e-1],
            negative_ratios: vec![None, Some(5), Some(25), Some(50), Some(100), Some(125), Some(150), Some(250)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub config: TrainConfig,
    pub stage: GridStage,
    pub val_mrr: f64,
}

fn argmax(results: &[GridResult]) -> &GridResult {
    results
        .iter()
        .max_by(|a, b| a.val_mrr.partial_cmp(&b.val_mrr).unwrap_or(std::cmp::Ordering::Less))
        .expect("non-empty stage")
}

/// Run the beam over `grid` with an arbitrary evaluation function (validation
/// MRR of a config). Returns every evaluated configuration in order.
pub fn beam_search<F>(
    base: &TrainConfig,
    grid: &GridSpec,
    mut eval: F,
) -> Result<Vec<GridResult>, TrainError>
where
    F: FnMut(&TrainConfig) -> Result<f64, TrainError>,
{
    if grid.batch_sizes.is_empty() || grid.learning_rates.is_empty() || grid.negative_ratios.is_empty() {
        return Err(TrainError::EmptyGrid);
    }
    let mut results: Vec<GridResult> = Vec::new();

    // stage 1: batch size, pivoting on the first learning rate and ratio
    let mut stage = Vec::new();
    for &b in &grid.batch_sizes {
        let cfg = TrainConfig {
            batch_size: b,
            learning_rate: grid.learning_rates[0],
            ..*base
        }
        .with_ratio(grid.negative_ratios[0]);
        let val_mrr = eval(&cfg)?;
        stage.push(GridResult { config: cfg, stage: GridStage::BatchSize, val_mrr });
    }
    let best_batch = argmax(&stage).config.batch_size;
    results.extend(stage);

    // stage 2: learning rate at the best batch size
    let mut stage = Vec::new();
    for &lr in &grid.learning_rates {
        let cfg = TrainConfig {
            batch_size: best_batch,
            learning_rate: lr,
            ..*base
        }
        .with_ratio(grid.negative_ratios[0]);
        let val_mrr = eval(&cfg)?;
        stage.push(GridResult { config: cfg, stage: GridStage::LearningRate, val_mrr });
    }
    let best_lr = argmax(&stage).config.learning_rate;
    results.extend(stage);

    // stage 3: negative ratio at the best batch size and learning rate
    let mut stage = Vec::new();
    for &ratio in &grid.negative_ratios {
        let cfg = TrainConfig {
            batch_size: best_batch,
            learning_rate: best_lr,
            ..*base
        }
        .with_ratio(ratio);
        let val_mrr = eval(&cfg)?;
        stage.push(GridResult { config: cfg, stage: GridStage::NegativeRatio, val_mrr });
    }
    results.extend(stage);

    Ok(results)
}

/// Evaluate the beam by actually training each configuration; results come
/// back sorted by validation MRR, best first.
pub fn grid_search(
    split: &SplitDataset,
    kg: &KnowledgeGraph,
    spec: &ModelSpec,
    base: &TrainConfig,
    grid: &GridSpec,
) -> Result<Vec<GridResult>, TrainError> {
    let mut results = beam_search(base, grid, |cfg| {
        let trained = fit(split, kg, spec, cfg, |_| {})?;
        Ok(trained.best_val_mrr)
    })?;
    results.sort_by(|a, b| b.val_mrr.partial_cmp(&a.val_mrr).unwrap_or(std::cmp::Ordering::Equal));
    Ok(results)
}
