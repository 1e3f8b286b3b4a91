//! Knowledge-graph embedding benchmark engine.
//!
//! The pipeline: load a heterogeneous triple dataset ([`triples`]), produce a
//! connectivity-preserving train/valid/test split ([`split`]), train one of
//! seventeen embedding models over Euclidean, complex, or hyperbolic space
//! ([`models`], [`train`]), and evaluate with type-filtered link-prediction
//! ranking ([`eval`]).

pub mod eval;
pub mod exec;
pub mod geometry;
pub mod models;
pub mod split;
pub mod synth;
pub mod train;
pub mod triples;
