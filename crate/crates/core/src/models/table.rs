//! Shared parameter container for all scoring functions, plus the sparse
//! per-row gradient representation the trainer consumes.

use std::collections::HashMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::spec::{ModelKind, ModelSpec};
use crate::geometry;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_data(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Which parameter block a gradient row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamBlock {
    Entity,
    EntityExtra,
    HeadBias,
    TailBias,
    Relation,
    RelationExtra,
    Curvature,
}

pub const ALL_BLOCKS: [ParamBlock; 7] = [
    ParamBlock::Entity,
    ParamBlock::EntityExtra,
    ParamBlock::HeadBias,
    ParamBlock::TailBias,
    ParamBlock::Relation,
    ParamBlock::RelationExtra,
    ParamBlock::Curvature,
];

/// One parameter row (an embedding row, a bias scalar, a curvature scalar).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamRef {
    pub block: ParamBlock,
    pub row: usize,
}

impl ParamRef {
    pub fn new(block: ParamBlock, row: usize) -> Self {
        ParamRef { block, row }
    }
}

/// Gradient for the parameter rows touched by one or more triples.
#[derive(Debug, Clone, Default)]
pub struct SparseGrad {
    rows: HashMap<ParamRef, Vec<f64>>,
}

impl SparseGrad {
    pub fn new() -> Self {
        SparseGrad::default()
    }

    pub fn accumulate(&mut self, r: ParamRef, grad: &[f64]) {
        match self.rows.get_mut(&r) {
            Some(acc) => {
                for (a, g) in acc.iter_mut().zip(grad) {
                    *a += g;
                }
            }
            None => {
                self.rows.insert(r, grad.to_vec());
            }
        }
    }

    pub fn merge(&mut self, other: SparseGrad) {
        for (r, g) in other.rows {
            match self.rows.get_mut(&r) {
                Some(acc) => {
                    for (a, gi) in acc.iter_mut().zip(&g) {
                        *a += gi;
                    }
                }
                None => {
                    self.rows.insert(r, g);
                }
            }
        }
    }

    pub fn get(&self, r: &ParamRef) -> Option<&[f64]> {
        self.rows.get(r).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ParamRef, &Vec<f64>)> {
        self.rows.iter()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.rows.values().all(|g| g.iter().all(|v| v.is_finite()))
    }
}

/// Dense per-entity and per-relation parameters plus model-specific blocks.
///
/// Hyperbolic models store entity rows and relation translation rows as
/// points of the unit-curvature ball; relation-specific curvature is applied
/// at score time through the canonical scaling between balls.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub spec: ModelSpec,
    pub num_entities: usize,
    pub num_relations: usize,
    pub seed: u64,
    pub entity: Matrix,
    pub entity_extra: Option<Matrix>,
    pub head_bias: Vec<f64>,
    pub tail_bias: Vec<f64>,
    pub relation: Matrix,
    pub relation_extra: Option<Matrix>,
    /// Unconstrained scalars; the effective curvature is `softplus(raw)`.
    pub curvature_raw: Vec<f64>,
}

/// Raw value whose softplus is exactly 1.
pub fn curvature_raw_for_one() -> f64 {
    (std::f64::consts::E - 1.0f64).ln()
}

impl EmbeddingTable {
    pub fn block_shape(&self, b: ParamBlock) -> Option<(usize, usize)> {
        match b {
            ParamBlock::Entity => Some((self.entity.rows(), self.entity.cols())),
            ParamBlock::EntityExtra => self.entity_extra.as_ref().map(|m| (m.rows(), m.cols())),
            ParamBlock::HeadBias => {
                (!self.head_bias.is_empty()).then_some((self.head_bias.len(), 1))
            }
            ParamBlock::TailBias => {
                (!self.tail_bias.is_empty()).then_some((self.tail_bias.len(), 1))
            }
            ParamBlock::Relation => Some((self.relation.rows(), self.relation.cols())),
            ParamBlock::RelationExtra => self.relation_extra.as_ref().map(|m| (m.rows(), m.cols())),
            ParamBlock::Curvature => {
                (!self.curvature_raw.is_empty()).then_some((self.curvature_raw.len(), 1))
            }
        }
    }

    pub fn row(&self, r: ParamRef) -> &[f64] {
        match r.block {
            ParamBlock::Entity => self.entity.row(r.row),
            ParamBlock::EntityExtra => self.entity_extra.as_ref().expect("block present").row(r.row),
            ParamBlock::HeadBias => &self.head_bias[r.row..r.row + 1],
            ParamBlock::TailBias => &self.tail_bias[r.row..r.row + 1],
            ParamBlock::Relation => self.relation.row(r.row),
            ParamBlock::RelationExtra => self.relation_extra.as_ref().expect("block present").row(r.row),
            ParamBlock::Curvature => &self.curvature_raw[r.row..r.row + 1],
        }
    }

    pub fn row_mut(&mut self, r: ParamRef) -> &mut [f64] {
        match r.block {
            ParamBlock::Entity => self.entity.row_mut(r.row),
            ParamBlock::EntityExtra => self.entity_extra.as_mut().expect("block present").row_mut(r.row),
            ParamBlock::HeadBias => &mut self.head_bias[r.row..r.row + 1],
            ParamBlock::TailBias => &mut self.tail_bias[r.row..r.row + 1],
            ParamBlock::Relation => self.relation.row_mut(r.row),
            ParamBlock::RelationExtra => self.relation_extra.as_mut().expect("block present").row_mut(r.row),
            ParamBlock::Curvature => &mut self.curvature_raw[r.row..r.row + 1],
        }
    }

    /// Is this row a ball point (requires tangent-space updates and ball
    /// projection after optimizer steps)?
    pub fn is_ball_row(&self, r: ParamRef) -> bool {
        self.spec.kind.is_hyperbolic()
            && matches!(r.block, ParamBlock::Entity | ParamBlock::Relation)
    }

    pub fn effective_curvature(&self, relation: usize) -> f64 {
        softplus(self.curvature_raw[relation])
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Deterministically initialize a parameter table.
///
/// Euclidean and complex entries are uniform in `(-s, s)`; hyperbolic entity
/// and relation rows are drawn in tangent space and exp-mapped into the unit
/// ball; biases start at zero; curvature starts at 1 (raw softplus inverse);
/// the TransR projection starts at the identity plus uniform noise.
pub fn init_params(spec: &ModelSpec, num_entities: usize, num_relations: usize, seed: u64) -> EmbeddingTable {
    assert!(num_entities > 0 && num_relations > 0, "counts must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = spec.init_scale;
    let uniform = |n: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * s).collect()
    };

    let ew = spec.entity_width();
    let mut entity = Matrix::from_data(num_entities, ew, uniform(num_entities * ew, &mut rng));
    let rw = spec.relation_width();
    let mut relation = Matrix::from_data(num_relations, rw, uniform(num_relations * rw, &mut rng));

    if spec.kind.is_hyperbolic() {
        for i in 0..num_entities {
            let p = geometry::exp_map_zero(1.0, entity.row(i));
            entity.row_mut(i).copy_from_slice(&p);
        }
        for i in 0..num_relations {
            let p = geometry::exp_map_zero(1.0, relation.row(i));
            relation.row_mut(i).copy_from_slice(&p);
        }
    }

    let entity_extra = spec
        .entity_extra_width()
        .map(|w| Matrix::from_data(num_entities, w, uniform(num_entities * w, &mut rng)));

    let relation_extra = spec.relation_extra_width().map(|w| {
        let mut m = Matrix::from_data(num_relations, w, uniform(num_relations * w, &mut rng));
        if spec.kind == ModelKind::TransR {
            // identity + noise keeps the projection non-degenerate at start
            let d = spec.dim;
            for r in 0..num_relations {
                let row = m.row_mut(r);
                for i in 0..d {
                    row[i * d + i] += 1.0;
                }
            }
        }
        m
    });

    let (head_bias, tail_bias) = if spec.kind.uses_bias() {
        (vec![0.0; num_entities], vec![0.0; num_entities])
    } else {
        (Vec::new(), Vec::new())
    };

    let curvature_raw = if spec.kind.has_curvature() {
        vec![curvature_raw_for_one(); num_relations]
    } else {
        Vec::new()
    };

    EmbeddingTable {
        spec: *spec,
        num_entities,
        num_relations,
        seed,
        entity,
        entity_extra,
        head_bias,
        tail_bias,
        relation,
        relation_extra,
        curvature_raw,
    }
}
