//! Training objectives.

use serde::{Deserialize, Serialize};

use super::TrainError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// `mean softplus(-pos) + mean softplus(neg)` over sampled negatives.
    Bce,
    /// `-log softmax(true | all candidates)`; used when the negative ratio
    /// is `None` (all-entity normalization).
    Nll,
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Loss of a batch. For `Bce`, `neg[i]` holds the sampled negatives of
/// positive `i`; for `Nll`, `neg[i]` holds the scores of all candidates
/// (including the positive itself).
pub fn loss(pos: &[f64], neg: &[Vec<f64>], kind: LossKind) -> Result<f64, TrainError> {
    if pos.len() != neg.len() {
        return Err(TrainError::LossShape(format!(
            "{} positive scores but {} negative rows",
            pos.len(),
            neg.len()
        )));
    }
    if pos.is_empty() {
        return Err(TrainError::LossShape("empty batch".into()));
    }
    match kind {
        LossKind::Bce => {
            let n_neg: usize = neg.iter().map(Vec::len).sum();
            if n_neg == 0 {
                return Err(TrainError::LossShape("BCE requires negatives".into()));
            }
            let pos_term: f64 = pos.iter().map(|p| softplus(-p)).sum::<f64>() / pos.len() as f64;
            let neg_term: f64 =
                neg.iter().flatten().map(|n| softplus(*n)).sum::<f64>() / n_neg as f64;
            Ok(pos_term + neg_term)
        }
        LossKind::Nll => {
            let mut total = 0.0;
            for (p, row) in pos.iter().zip(neg) {
                if row.is_empty() {
                    return Err(TrainError::LossShape("NLL requires a candidate row".into()));
                }
                total += log_sum_exp(row) - p;
            }
            Ok(total / pos.len() as f64)
        }
    }
}
