//! Embedding models: parameter tables, scoring functions, analytic
//! gradients, and persistence.

mod autodiff;
mod persist;
mod score;
mod spec;
mod table;

pub use persist::{load_table, save_table, PersistError};
pub use score::{gradient, score, score_and_gradient, score_batch, ModelError, Partial};
pub use spec::{ModelCategory, ModelKind, ModelSpec, Norm, ALL_MODELS};
pub use table::{
    curvature_raw_for_one, init_params, EmbeddingTable, Matrix, ParamBlock, ParamRef, SparseGrad,
    ALL_BLOCKS,
};
