//! Minibatch training with per-epoch validation MRR and early stopping.

use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{loss, LossKind};
use super::negative::{sample_negatives, sample_negatives_symmetric};
use super::optimizer::AdamState;
use super::{TrainConfig, TrainError};
use crate::eval::{EvalMode, Ranker};
use crate::exec;
use crate::models::{self, EmbeddingTable, ModelSpec, SparseGrad};
use crate::split::SplitDataset;
use crate::triples::{EntityId, KnowledgeGraph, Triple};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mrr: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    /// Parameters from the best validation epoch.
    pub table: EmbeddingTable,
    pub log: Vec<EpochRecord>,
    pub stopping_epoch: usize,
    pub best_epoch: usize,
    pub best_val_mrr: f64,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One positive with its sampled negatives (pre-drawn so the parallel
/// gradient pass stays deterministic).
struct BatchItem {
    positive: Triple,
    negatives: Vec<Triple>,
}

fn bce_batch(
    table: &EmbeddingTable,
    items: &[BatchItem],
) -> Result<(f64, SparseGrad), TrainError> {
    let b = items.len() as f64;
    let k: usize = items.iter().map(|i| i.negatives.len()).sum();
    let k = k as f64;
    let per_item: Vec<Result<(f64, Vec<f64>, SparseGrad), models::ModelError>> =
        exec::map(items, |item| {
            let mut grads = SparseGrad::new();
            let (pos_score, g) =
                models::score_and_gradient(table, &item.positive, |s| -sigmoid(-s) / b)?;
            grads.merge(g);
            let mut neg_scores = Vec::with_capacity(item.negatives.len());
            for neg in &item.negatives {
                let (s, g) = models::score_and_gradient(table, neg, |s| sigmoid(s) / k)?;
                neg_scores.push(s);
                grads.merge(g);
            }
            Ok((pos_score, neg_scores, grads))
        });

    let mut pos_scores = Vec::with_capacity(items.len());
    let mut neg_rows = Vec::with_capacity(items.len());
    let mut grads = SparseGrad::new();
    for r in per_item {
        let (p, n, g) = r?;
        pos_scores.push(p);
        neg_rows.push(n);
        grads.merge(g);
    }
    let l = loss(&pos_scores, &neg_rows, LossKind::Bce)?;
    Ok((l, grads))
}

fn nll_batch(
    table: &EmbeddingTable,
    positives: &[Triple],
    num_entities: usize,
) -> Result<(f64, SparseGrad), TrainError> {
    let b = positives.len() as f64;
    let candidates: Vec<EntityId> = (0..num_entities as u32).map(EntityId).collect();
    let per_item: Vec<Result<(f64, Vec<f64>, SparseGrad), models::ModelError>> =
        exec::map(positives, |pos| {
            let scores = models::score_batch(
                table,
                models::Partial::Tail { head: pos.head, relation: pos.relation },
                &candidates,
            )?;
            // softmax over all candidate tails
            let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = scores.iter().map(|s| (s - m).exp()).sum();
            let mut grads = SparseGrad::new();
            for (j, c) in candidates.iter().enumerate() {
                let p_j = (scores[j] - m).exp() / z;
                let indicator = if *c == pos.tail { 1.0 } else { 0.0 };
                let upstream = (p_j - indicator) / b;
                let t = Triple::new(pos.head, pos.relation, *c);
                grads.merge(models::gradient(table, &t, upstream)?);
            }
            Ok((scores[pos.tail.0 as usize], scores, grads))
        });

    let mut pos_scores = Vec::with_capacity(positives.len());
    let mut rows = Vec::with_capacity(positives.len());
    let mut grads = SparseGrad::new();
    for r in per_item {
        let (p, row, g) = r?;
        pos_scores.push(p);
        rows.push(row);
        grads.merge(g);
    }
    let l = loss(&pos_scores, &rows, LossKind::Nll)?;
    Ok((l, grads))
}

/// Train `spec` on the split's training triples. After each epoch the
/// validation MRR (type+truth-filtered, candidates from the training
/// triples) is recorded; training stops when it has not improved for
/// `patience` consecutive epochs or at `max_epochs`, and the parameters of
/// the best epoch are returned. `hook` observes each epoch record.
pub fn fit(
    split: &SplitDataset,
    kg: &KnowledgeGraph,
    spec: &ModelSpec,
    cfg: &TrainConfig,
    mut hook: impl FnMut(&EpochRecord),
) -> Result<TrainedModel, TrainError> {
    cfg.validate()?;
    if split.train.is_empty() {
        return Err(TrainError::EmptyTrainSet);
    }

    let mut table = models::init_params(spec, kg.num_entities(), kg.num_relations(), cfg.seed);
    let mut opt = AdamState::new(&table, cfg.optimizer);
    // distinct stream from parameter init
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9E37_79B9_7F4A_7C15);
    let has_validation = !split.valid.is_empty();

    let mut log: Vec<EpochRecord> = Vec::new();
    let mut best: Option<(f64, usize, EmbeddingTable)> = None;
    let mut bad_epochs = 0usize;
    let mut indices: Vec<usize> = (0..split.train.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        indices.shuffle(&mut rng);
        let mut loss_sum = 0.0;

        for chunk in indices.chunks(cfg.batch_size) {
            let (batch_loss, grads) = match cfg.negative_ratio {
                Some(ratio) => {
                    let items: Vec<BatchItem> = chunk
                        .iter()
                        .map(|&i| {
                            let positive = split.train[i];
                            let negatives = if cfg.symmetric_negatives {
                                sample_negatives_symmetric(&positive, ratio, kg.num_entities(), &mut rng)
                            } else {
                                sample_negatives(&positive, ratio, kg.num_entities(), &mut rng)
                            };
                            BatchItem { positive, negatives }
                        })
                        .collect();
                    bce_batch(&table, &items)?
                }
                None => {
                    let positives: Vec<Triple> = chunk.iter().map(|&i| split.train[i]).collect();
                    nll_batch(&table, &positives, kg.num_entities())?
                }
            };
            if !batch_loss.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch });
            }
            loss_sum += batch_loss * chunk.len() as f64;
            opt.step(&mut table, &grads, cfg.learning_rate)?;
        }
        let train_loss = loss_sum / split.train.len() as f64;

        let val_mrr = if has_validation {
            let ranker = Ranker::new(
                &table,
                kg,
                &split.train,
                &[&split.train, &split.valid],
                EvalMode::TypeTruth,
            );
            ranker.evaluate(&split.valid)?.overall.mrr
        } else {
            0.0
        };

        let record = EpochRecord {
            epoch,
            train_loss,
            val_mrr,
            seconds: started.elapsed().as_secs_f64(),
        };
        hook(&record);
        log.push(record);

        let improved = match &best {
            Some((best_mrr, _, _)) => val_mrr > *best_mrr,
            None => true,
        };
        if improved {
            best = Some((val_mrr, epoch, table.clone()));
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
            if has_validation && bad_epochs >= cfg.patience {
                break;
            }
        }
    }

    let stopping_epoch = log.len();
    let (best_val_mrr, best_epoch, best_table) = best.expect("at least one epoch ran");
    Ok(TrainedModel {
        spec: *spec,
        table: if has_validation { best_table } else { table },
        log,
        stopping_epoch,
        best_epoch,
        best_val_mrr,
    })
}
