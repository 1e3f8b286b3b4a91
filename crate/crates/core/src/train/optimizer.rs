//! Adam with dense or sparse-row state over the embedding table.
//!
//! Euclidean rows take the plain Adam step. Ball-point rows (hyperbolic
//! entity and relation translations) apply the step in the tangent space at
//! the origin and are exp-mapped back and projected, so the ball invariant
//! holds after every step.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::geometry;
use crate::models::{EmbeddingTable, ParamBlock, ParamRef, SparseGrad, ALL_BLOCKS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    /// Dense semantics: moments of every row decay each step.
    #[default]
    Adam,
    /// Moments update only for rows that received gradient this step.
    SparseAdam,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct AdamState {
    kind: OptimizerKind,
    step: u64,
    m: HashMap<ParamBlock, Vec<f64>>,
    v: HashMap<ParamBlock, Vec<f64>>,
}

impl AdamState {
    pub fn new(table: &EmbeddingTable, kind: OptimizerKind) -> Self {
        let mut m = HashMap::new();
        let mut v = HashMap::new();
        for b in ALL_BLOCKS {
            if let Some((rows, cols)) = table.block_shape(b) {
                m.insert(b, vec![0.0; rows * cols]);
                v.insert(b, vec![0.0; rows * cols]);
            }
        }
        AdamState { kind, step: 0, m, v }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Moment slices for a row, for tests and diagnostics.
    pub fn moments(&self, table: &EmbeddingTable, r: ParamRef) -> (&[f64], &[f64]) {
        let (_, cols) = table.block_shape(r.block).expect("block present");
        let lo = r.row * cols;
        let hi = lo + cols;
        (&self.m[&r.block][lo..hi], &self.v[&r.block][lo..hi])
    }

    fn update_row(
        &mut self,
        table: &mut EmbeddingTable,
        r: ParamRef,
        grad: Option<&[f64]>,
        lr: f64,
        bc1: f64,
        bc2: f64,
    ) {
        let (_, cols) = table.block_shape(r.block).expect("block present");
        let lo = r.row * cols;
        let m = &mut self.m.get_mut(&r.block).expect("state present")[lo..lo + cols];
        let v = &mut self.v.get_mut(&r.block).expect("state present")[lo..lo + cols];

        let mut delta = vec![0.0; cols];
        let mut any_nonzero = false;
        for i in 0..cols {
            let g = grad.map_or(0.0, |g| g[i]);
            m[i] = BETA1 * m[i] + (1.0 - BETA1) * g;
            v[i] = BETA2 * v[i] + (1.0 - BETA2) * g * g;
            let mh = m[i] / bc1;
            let vh = v[i] / bc2;
            delta[i] = lr * mh / (vh.sqrt() + EPS);
            any_nonzero |= delta[i] != 0.0;
        }
        if !any_nonzero {
            return; // untouched row stays bit-identical
        }

        if table.is_ball_row(r) {
            let row = table.row(r);
            let mut tangent = geometry::log_map_zero(1.0, row).expect("ball row inside ball");
            for i in 0..cols {
                tangent[i] -= delta[i];
            }
            let mut point = geometry::exp_map_zero(1.0, &tangent);
            geometry::project_to_ball(1.0, &mut point);
            table.row_mut(r).copy_from_slice(&point);
        } else {
            let row = table.row_mut(r);
            for i in 0..cols {
                row[i] -= delta[i];
            }
        }
    }

    /// Apply one optimizer step for `grads` (gradients of the loss).
    pub fn step(
        &mut self,
        table: &mut EmbeddingTable,
        grads: &SparseGrad,
        lr: f64,
    ) -> Result<(), TrainError> {
        for (r, g) in grads.iter() {
            if g.iter().any(|x| !x.is_finite()) {
                return Err(TrainError::NonFiniteGradient { param: *r });
            }
        }
        self.step += 1;
        let bc1 = 1.0 - BETA1.powi(self.step as i32);
        let bc2 = 1.0 - BETA2.powi(self.step as i32);

        match self.kind {
            OptimizerKind::SparseAdam => {
                // deterministic application order
                let mut refs: Vec<ParamRef> = grads.iter().map(|(r, _)| *r).collect();
                refs.sort_unstable();
                for r in refs {
                    let g = grads.get(&r).expect("present").to_vec();
                    self.update_row(table, r, Some(&g), lr, bc1, bc2);
                }
            }
            OptimizerKind::Adam => {
                for b in ALL_BLOCKS {
                    let Some((rows, _)) = table.block_shape(b) else { continue };
                    for row in 0..rows {
                        let r = ParamRef::new(b, row);
                        let g = grads.get(&r).map(<[f64]>::to_vec);
                        self.update_row(table, r, g.as_deref(), lr, bc1, bc2);
                    }
                }
            }
        }
        Ok(())
    }
}
