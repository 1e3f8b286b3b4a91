//! Rank-based link-prediction evaluation.
//!
//! For each test triple, both the head and the tail slot are corrupted with
//! candidate entities, candidates are scored, and the target's pessimistic
//! rank (ties count as ranked above) feeds MR/MRR/Hits@k. The candidate
//! universe per relation and slot comes from node types observed in the
//! training triples only; the truth filter additionally removes candidates
//! completing any known-true triple other than the target.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::exec;
use crate::models::{self, EmbeddingTable, ModelError, Partial};
use crate::triples::{EntityId, KnowledgeGraph, RelationId, Slot, Triple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    Raw,
    Type,
    #[default]
    TypeTruth,
}

impl EvalMode {
    pub fn parse(s: &str) -> Option<EvalMode> {
        match s.to_ascii_lowercase().as_str() {
            "raw" => Some(EvalMode::Raw),
            "type" => Some(EvalMode::Type),
            "type-truth" | "type_truth" | "typetruth" => Some(EvalMode::TypeTruth),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            EvalMode::Raw => "raw",
            EvalMode::Type => "type",
            EvalMode::TypeTruth => "type-truth",
        }
    }
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("evaluation target {target:?} missing from the {slot:?} candidate set of relation {relation:?} (type-map inconsistency)")]
    TargetNotInCandidates { target: EntityId, relation: RelationId, slot: Slot },
    #[error("relation {0:?} has no training triples; no candidate set can be derived")]
    RelationUnseenInTraining(RelationId),
    #[error("empty test set")]
    EmptyTestSet,
    #[error("non-finite score encountered during ranking")]
    NonFiniteScore,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One ranking outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankResult {
    pub triple: Triple,
    pub slot: Slot,
    /// 1-based pessimistic rank of the target.
    pub rank: usize,
    /// Number of candidates ranked against (after filtering).
    pub candidates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mr: f64,
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
    pub count: usize,
}

impl Metrics {
    pub fn from_ranks<I: IntoIterator<Item = usize>>(ranks: I) -> Metrics {
        let mut mr = 0.0;
        let mut mrr = 0.0;
        let mut h = [0usize; 3];
        let mut n = 0usize;
        for rank in ranks {
            debug_assert!(rank >= 1);
            mr += rank as f64;
            mrr += 1.0 / rank as f64;
            if rank <= 1 {
                h[0] += 1;
            }
            if rank <= 3 {
                h[1] += 1;
            }
            if rank <= 10 {
                h[2] += 1;
            }
            n += 1;
        }
        let n_f = n.max(1) as f64;
        Metrics {
            mr: mr / n_f,
            mrr: mrr / n_f,
            hits1: h[0] as f64 / n_f,
            hits3: h[1] as f64 / n_f,
            hits10: h[2] as f64 / n_f,
            count: n,
        }
    }
}

/// Aggregated report with a per-relation breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mode: EvalMode,
    pub overall: Metrics,
    pub per_relation: Vec<(String, Metrics)>,
}

impl MetricsReport {
    pub fn from_rank_results(
        mode: EvalMode,
        results: &[RankResult],
        kg: &KnowledgeGraph,
    ) -> MetricsReport {
        let overall = Metrics::from_ranks(results.iter().map(|r| r.rank));
        let mut by_rel: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for r in results {
            by_rel.entry(r.triple.relation.0).or_default().push(r.rank);
        }
        let per_relation = by_rel
            .into_iter()
            .map(|(rel, ranks)| {
                (kg.relation_vocab().label(rel).to_string(), Metrics::from_ranks(ranks))
            })
            .collect();
        MetricsReport { mode, overall, per_relation }
    }
}

/// Fixed-width comparison table: one row per labelled report, columns
/// MR / MRR / Hit@1 / Hit@3 / Hit@10.
pub fn render_table(rows: &[(String, &MetricsReport)]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<12} {:>10} {:>8} {:>8} {:>8} {:>8}  mode\n",
        "Model", "MR", "MRR", "Hit@1", "Hit@3", "Hit@10"
    ));
    for (name, report) in rows {
        let m = &report.overall;
        out.push_str(&format!(
            "{:<12} {:>10.2} {:>8.4} {:>8.4} {:>8.4} {:>8.4}  {}\n",
            name, m.mr, m.mrr, m.hits1, m.hits3, m.hits10, report.mode
        ));
    }
    out
}

/// Ranking engine bound to one trained model and one dataset.
pub struct Ranker<'a> {
    table: &'a EmbeddingTable,
    kg: &'a KnowledgeGraph,
    /// Per train-observed relation: sorted head/tail candidate lists.
    candidates: HashMap<u32, (Vec<EntityId>, Vec<EntityId>)>,
    known: HashSet<u128>,
    mode: EvalMode,
}

impl<'a> Ranker<'a> {
    /// `train` supplies the observed relation/type pairs for type filtering;
    /// `known` lists every triple set treated as true by the truth filter
    /// (conventionally train, valid, and test).
    pub fn new(
        table: &'a EmbeddingTable,
        kg: &'a KnowledgeGraph,
        train: &[Triple],
        known: &[&[Triple]],
        mode: EvalMode,
    ) -> Self {
        let mut pair_types: HashMap<u32, (BTreeSet<u16>, BTreeSet<u16>)> = HashMap::new();
        for t in train {
            let e = pair_types.entry(t.relation.0).or_default();
            e.0.insert(kg.entity_type(t.head).0);
            e.1.insert(kg.entity_type(t.tail).0);
        }
        let candidates = pair_types
            .into_iter()
            .map(|(rel, (head_types, tail_types))| {
                let expand = |types: &BTreeSet<u16>| -> Vec<EntityId> {
                    let mut out: Vec<u32> = Vec::new();
                    for &ty in types {
                        out.extend_from_slice(kg.entities_of_type(crate::triples::NodeTypeId(ty)));
                    }
                    out.sort_unstable();
                    out.dedup();
                    out.into_iter().map(EntityId).collect()
                };
                (rel, (expand(&head_types), expand(&tail_types)))
            })
            .collect();
        let known = known.iter().flat_map(|s| s.iter()).map(Triple::key).collect();
        Ranker { table, kg, candidates, known, mode }
    }

    fn candidate_list(&self, triple: &Triple, slot: Slot) -> Result<Vec<EntityId>, EvalError> {
        let mut cands = match self.mode {
            EvalMode::Raw => (0..self.kg.num_entities() as u32).map(EntityId).collect(),
            EvalMode::Type | EvalMode::TypeTruth => {
                let (heads, tails) = self
                    .candidates
                    .get(&triple.relation.0)
                    .ok_or(EvalError::RelationUnseenInTraining(triple.relation))?;
                match slot {
                    Slot::Head => heads.clone(),
                    Slot::Tail => tails.clone(),
                }
            }
        };
        if self.mode == EvalMode::TypeTruth {
            let target = match slot {
                Slot::Head => triple.head,
                Slot::Tail => triple.tail,
            };
            cands.retain(|&c| {
                if c == target {
                    return true;
                }
                let completed = match slot {
                    Slot::Head => Triple::new(c, triple.relation, triple.tail),
                    Slot::Tail => Triple::new(triple.head, triple.relation, c),
                };
                !self.known.contains(&completed.key())
            });
        }
        Ok(cands)
    }

    /// Rank the target entity of `triple` in `slot` against its candidates.
    pub fn rank_one(&self, triple: &Triple, slot: Slot) -> Result<RankResult, EvalError> {
        let cands = self.candidate_list(triple, slot)?;
        let target = match slot {
            Slot::Head => triple.head,
            Slot::Tail => triple.tail,
        };
        let target_pos = cands.binary_search(&target).map_err(|_| EvalError::TargetNotInCandidates {
            target,
            relation: triple.relation,
            slot,
        })?;
        let partial = match slot {
            Slot::Head => Partial::Head { relation: triple.relation, tail: triple.tail },
            Slot::Tail => Partial::Tail { head: triple.head, relation: triple.relation },
        };
        let scores = models::score_batch(self.table, partial, &cands)?;
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(EvalError::NonFiniteScore);
        }
        let target_score = scores[target_pos];
        let mut rank = 1usize;
        for (i, s) in scores.iter().enumerate() {
            if i == target_pos {
                continue;
            }
            if *s >= target_score {
                rank += 1;
            }
        }
        Ok(RankResult { triple: *triple, slot, rank, candidates: cands.len() })
    }

    /// Head- and tail-slot ranks for every test triple (2 results per
    /// triple), in input order.
    pub fn rank_all(&self, test: &[Triple]) -> Result<Vec<RankResult>, EvalError> {
        if test.is_empty() {
            return Err(EvalError::EmptyTestSet);
        }
        let per_triple: Vec<Result<(RankResult, RankResult), String>> = exec::map(test, |t| {
            let head = self.rank_one(t, Slot::Head).map_err(|e| e.to_string())?;
            let tail = self.rank_one(t, Slot::Tail).map_err(|e| e.to_string())?;
            Ok((head, tail))
        });
        let mut out = Vec::with_capacity(test.len() * 2);
        for r in per_triple {
            match r {
                Ok((h, t)) => {
                    out.push(h);
                    out.push(t);
                }
                Err(_) => {
                    // re-rank sequentially to surface the typed error
                    for t in test {
                        self.rank_one(t, Slot::Head)?;
                        self.rank_one(t, Slot::Tail)?;
                    }
                    unreachable!("sequential pass must reproduce the error");
                }
            }
        }
        Ok(out)
    }

    /// Full evaluation: MR/MRR/Hits@k averaged over head- and tail-slot
    /// ranks of the test set, with a per-relation breakdown.
    pub fn evaluate(&self, test: &[Triple]) -> Result<MetricsReport, EvalError> {
        let results = self.rank_all(test)?;
        Ok(MetricsReport::from_rank_results(self.mode, &results, self.kg))
    }
}
