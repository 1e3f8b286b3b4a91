//! Model catalog: names, categories, and per-model parameter shapes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Every benchmarked scoring function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    TransE,
    TransH,
    TransR,
    TransD,
    DistMult,
    SimplE,
    Cp,
    ComplEx,
    RotatE,
    MuRP,
    AttE,
    RefE,
    RotE,
    MurE,
    AttH,
    RefH,
    RotH,
}

/// Grouping used in benchmark reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelCategory {
    Distance,
    Semantic,
    Complex,
    Hyperbolic,
}

pub const ALL_MODELS: [ModelKind; 17] = [
    ModelKind::TransE,
    ModelKind::TransH,
    ModelKind::TransR,
    ModelKind::TransD,
    ModelKind::DistMult,
    ModelKind::SimplE,
    ModelKind::Cp,
    ModelKind::ComplEx,
    ModelKind::RotatE,
    ModelKind::MuRP,
    ModelKind::AttE,
    ModelKind::RefE,
    ModelKind::RotE,
    ModelKind::MurE,
    ModelKind::AttH,
    ModelKind::RefH,
    ModelKind::RotH,
];

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::TransE => "TransE",
            ModelKind::TransH => "TransH",
            ModelKind::TransR => "TransR",
            ModelKind::TransD => "TransD",
            ModelKind::DistMult => "DistMult",
            ModelKind::SimplE => "SimplE",
            ModelKind::Cp => "CP",
            ModelKind::ComplEx => "ComplEx",
            ModelKind::RotatE => "RotatE",
            ModelKind::MuRP => "MuRP",
            ModelKind::AttE => "AttE",
            ModelKind::RefE => "RefE",
            ModelKind::RotE => "RotE",
            ModelKind::MurE => "MurE",
            ModelKind::AttH => "AttH",
            ModelKind::RefH => "RefH",
            ModelKind::RotH => "RotH",
        }
    }

    pub fn category(&self) -> ModelCategory {
        match self {
            ModelKind::TransE
            | ModelKind::TransH
            | ModelKind::TransR
            | ModelKind::TransD
            | ModelKind::AttE
            | ModelKind::RefE
            | ModelKind::RotE
            | ModelKind::MurE => ModelCategory::Distance,
            ModelKind::DistMult | ModelKind::SimplE | ModelKind::Cp => ModelCategory::Semantic,
            ModelKind::ComplEx | ModelKind::RotatE => ModelCategory::Complex,
            ModelKind::MuRP | ModelKind::AttH | ModelKind::RefH | ModelKind::RotH => ModelCategory::Hyperbolic,
        }
    }

    /// Entity rows of hyperbolic models are ball points; everything else is a
    /// free Euclidean (or complex) vector.
    pub fn is_hyperbolic(&self) -> bool {
        matches!(self, ModelKind::MuRP | ModelKind::AttH | ModelKind::RefH | ModelKind::RotH)
    }

    pub fn is_complex(&self) -> bool {
        matches!(self, ModelKind::ComplEx | ModelKind::RotatE)
    }

    /// Models whose score includes per-entity head/tail bias terms.
    pub fn uses_bias(&self) -> bool {
        matches!(
            self,
            ModelKind::MuRP
                | ModelKind::AttH
                | ModelKind::RefH
                | ModelKind::RotH
                | ModelKind::AttE
                | ModelKind::RefE
                | ModelKind::RotE
                | ModelKind::MurE
        )
    }

    pub fn has_curvature(&self) -> bool {
        self.is_hyperbolic()
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ALL_MODELS
            .iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .copied()
            .ok_or_else(|| format!("unknown model {s:?}"))
    }
}

/// Norm used by the translation-style distances. `L2` scores with the
/// squared Euclidean distance; `L1` with the absolute-value sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    #[default]
    L1,
    L2,
}

/// Full scoring-function specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Embedding dimension (complex models use `dim` complex components).
    pub dim: usize,
    #[serde(default)]
    pub norm: Norm,
    /// Half-width of the uniform init interval.
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
}

fn default_init_scale() -> f64 {
    1e-3
}

impl ModelSpec {
    pub fn new(kind: ModelKind, dim: usize) -> Self {
        assert!(dim >= 2, "embedding dimension must be at least 2");
        ModelSpec { kind, dim, norm: Norm::L1, init_scale: default_init_scale() }
    }

    /// Benchmark-default configuration: d = 512.
    pub fn benchmark_default(kind: ModelKind) -> Self {
        ModelSpec::new(kind, 512)
    }

    pub fn entity_width(&self) -> usize {
        if self.kind.is_complex() {
            2 * self.dim
        } else {
            self.dim
        }
    }

    /// Second per-entity block: the tail-role table (SimplE/CP) or the
    /// TransD projection vector.
    pub fn entity_extra_width(&self) -> Option<usize> {
        match self.kind {
            ModelKind::TransD | ModelKind::SimplE | ModelKind::Cp => Some(self.dim),
            _ => None,
        }
    }

    pub fn relation_width(&self) -> usize {
        match self.kind {
            ModelKind::ComplEx => 2 * self.dim,
            _ => self.dim,
        }
    }

    /// Model-specific relation parameters, flattened.
    pub fn relation_extra_width(&self) -> Option<usize> {
        let d = self.dim;
        let half = d / 2;
        match self.kind {
            ModelKind::TransH | ModelKind::TransD => Some(d),
            ModelKind::TransR => Some(d * d),
            ModelKind::SimplE => Some(d),         // inverse-relation diagonal
            ModelKind::MuRP | ModelKind::MurE => Some(d), // diagonal scaling
            ModelKind::RotH | ModelKind::RefH | ModelKind::RotE | ModelKind::RefE => Some(half),
            ModelKind::AttH | ModelKind::AttE => Some(2 * half + d), // rot angles | ref angles | attention vector
            _ => None,
        }
    }
}
