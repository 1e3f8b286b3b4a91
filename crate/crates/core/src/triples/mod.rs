//! Triple storage: vocabularies, node types, view tags, and the indexed
//! knowledge graph that the splitter, trainer, and evaluator read from.
//!
//! A graph is built once (from files or programmatically via [`KgBuilder`])
//! and is immutable afterwards, so it can be shared freely across worker
//! threads.

mod fetch;
mod load;
mod stats;

pub use fetch::fetch_dataset;
pub use load::{load_triples, load_type_map, load_view_files, LoadOptions};
pub use stats::{RelationStats, StatsReport, TypeStats};

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

/// Dense entity index. The original label is kept in the vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityId(pub u32);

/// Dense relation index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationId(pub u32);

/// Dense node-type index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeTypeId(pub u16);

/// One directed fact: head --relation--> tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Triple { head, relation, tail }
    }

    /// Packed key for constant-time membership sets.
    pub fn key(&self) -> u128 {
        ((self.head.0 as u128) << 64) | ((self.relation.0 as u128) << 32) | self.tail.0 as u128
    }
}

/// Which side of a triple a candidate entity fills.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Slot {
    Head,
    Tail,
}

/// View membership of a triple. `Whole` is the union of the other three and
/// is only meaningful as a filter argument, never as a stored tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewTag {
    Ontology,
    Instance,
    Bridge,
    Whole,
}

impl ViewTag {
    pub fn parse(token: &str) -> Option<ViewTag> {
        match token.trim().to_ascii_lowercase().as_str() {
            "ontology" | "o" => Some(ViewTag::Ontology),
            "instance" | "i" => Some(ViewTag::Instance),
            "bridge" | "b" => Some(ViewTag::Bridge),
            "whole" | "w" => Some(ViewTag::Whole),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ViewTag::Ontology => "ontology",
            ViewTag::Instance => "instance",
            ViewTag::Bridge => "bridge",
            ViewTag::Whole => "whole",
        }
    }
}

impl fmt::Display for ViewTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Errors from loading, indexing, or serving triples.
#[derive(Debug, thiserror::Error)]
pub enum KgError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: expected 3 or 4 columns, found {found}")]
    MalformedRow { path: PathBuf, line: usize, found: usize },
    #[error("{path}:{line}: unknown view tag {token:?}")]
    UnknownView { path: PathBuf, line: usize, token: String },
    #[error("no node type resolvable for entity {label:?}")]
    UnresolvableType { label: String },
    #[error("empty triple file: {path}")]
    EmptyFile { path: PathBuf },
    #[error("unknown relation id {0:?}")]
    UnknownRelation(RelationId),
    #[error("digest mismatch for {name}: expected {expected}, got {actual} (cache entry quarantined)")]
    DigestMismatch { name: String, expected: String, actual: String },
    #[error("fetch of {url} failed: {message}")]
    Fetch { url: String, message: String },
}

/// Bijective label <-> dense-index mapping.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Vocab {
    labels: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn new() -> Self {
        Vocab::default()
    }

    pub fn intern(&mut self, label: &str) -> u32 {
        if let Some(&i) = self.index.get(label) {
            return i;
        }
        let i = self.labels.len() as u32;
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), i);
        i
    }

    pub fn get(&self, label: &str) -> Option<u32> {
        self.index.get(label).copied()
    }

    pub fn label(&self, i: u32) -> &str {
        &self.labels[i as usize]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Rebuild the label->index map (needed after deserialization).
    pub fn rebuild_index(&mut self) {
        self.index = self
            .labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i as u32))
            .collect();
    }
}

/// How to resolve each entity's node type at load time.
#[derive(Debug, Clone)]
pub enum TypeSource {
    /// Type is the label text before the first occurrence of `delimiter`
    /// ("GO:0008150" -> type "GO"). Labels without the delimiter fail.
    Prefix { delimiter: char },
    /// Explicit label -> type-name map (from a sidecar file); labels missing
    /// from the map fall back to the prefix convention.
    Sidecar { map: HashMap<String, String>, prefix_delimiter: char },
}

impl Default for TypeSource {
    fn default() -> Self {
        TypeSource::Prefix { delimiter: ':' }
    }
}

impl TypeSource {
    fn resolve(&self, label: &str) -> Option<String> {
        match self {
            TypeSource::Prefix { delimiter } => {
                label.split(*delimiter).next().filter(|p| !p.is_empty() && p.len() < label.len()).map(str::to_string)
            }
            TypeSource::Sidecar { map, prefix_delimiter } => map.get(label).cloned().or_else(|| {
                TypeSource::Prefix { delimiter: *prefix_delimiter }.resolve(label)
            }),
        }
    }
}

/// Immutable, indexed triple collection.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entities: Vocab,
    relations: Vocab,
    types: Vocab,
    entity_types: Vec<NodeTypeId>,
    triples: Vec<Triple>,
    views: Vec<ViewTag>,
    head_index: Vec<HashMap<u32, Vec<u32>>>,
    tail_index: Vec<HashMap<u32, Vec<u32>>>,
    rel_type_pairs: Vec<BTreeSet<(u16, u16)>>,
    entities_by_type: Vec<Vec<u32>>,
}

impl KnowledgeGraph {
    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn views(&self) -> &[ViewTag] {
        &self.views
    }

    pub fn entity_vocab(&self) -> &Vocab {
        &self.entities
    }

    pub fn relation_vocab(&self) -> &Vocab {
        &self.relations
    }

    pub fn type_vocab(&self) -> &Vocab {
        &self.types
    }

    pub fn entity_type(&self, e: EntityId) -> NodeTypeId {
        self.entity_types[e.0 as usize]
    }

    pub fn entities_of_type(&self, t: NodeTypeId) -> &[u32] {
        &self.entities_by_type[t.0 as usize]
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.triples.binary_search(t).is_ok()
    }

    /// Tails observed for (head, relation) — sorted, deduplicated.
    pub fn tails_of(&self, relation: RelationId, head: EntityId) -> &[u32] {
        self.head_index[relation.0 as usize]
            .get(&head.0)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Heads observed for (relation, tail) — sorted, deduplicated.
    pub fn heads_of(&self, relation: RelationId, tail: EntityId) -> &[u32] {
        self.tail_index[relation.0 as usize]
            .get(&tail.0)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Observed (head-type, tail-type) pairs for a relation.
    pub fn relation_type_pairs(&self, relation: RelationId) -> Result<&BTreeSet<(u16, u16)>, KgError> {
        self.rel_type_pairs
            .get(relation.0 as usize)
            .filter(|s| !s.is_empty())
            .ok_or(KgError::UnknownRelation(relation))
    }

    /// All entities whose node type was observed in `slot` for `relation`.
    ///
    /// This is the type-filtered candidate universe of the evaluation
    /// protocol; it always contains every entity that actually appears in
    /// that slot for that relation.
    pub fn candidate_set(&self, relation: RelationId, slot: Slot) -> Result<Vec<EntityId>, KgError> {
        let pairs = self.relation_type_pairs(relation)?;
        let mut type_set: BTreeSet<u16> = BTreeSet::new();
        for &(ht, tt) in pairs {
            type_set.insert(match slot {
                Slot::Head => ht,
                Slot::Tail => tt,
            });
        }
        let mut out: Vec<u32> = Vec::new();
        for t in type_set {
            out.extend_from_slice(&self.entities_by_type[t as usize]);
        }
        out.sort_unstable();
        out.dedup();
        Ok(out.into_iter().map(EntityId).collect())
    }

    /// Restrict to one view. `Whole` returns everything unchanged; other tags
    /// select matching triples and shrink the vocabularies to referenced
    /// entities and relations (ids are re-assigned).
    pub fn view_filter(&self, view: ViewTag) -> KnowledgeGraph {
        if view == ViewTag::Whole {
            return self.clone();
        }
        let mut b = KgBuilder::new(TypeSource::default());
        for (t, &tag) in self.triples.iter().zip(&self.views) {
            if tag == view {
                let h = self.entities.label(t.head.0);
                let r = self.relations.label(t.relation.0);
                let tl = self.entities.label(t.tail.0);
                let ht = self.types.label(self.entity_type(t.head).0 as u32);
                let tt = self.types.label(self.entity_type(t.tail).0 as u32);
                b.add_typed(h, ht, r, tl, tt, tag);
            }
        }
        b.finish()
    }

    /// Hex SHA-256 over the sorted triple list (labels), used to tie trained
    /// models to the dataset they were trained on.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for t in &self.triples {
            hasher.update(self.entities.label(t.head.0).as_bytes());
            hasher.update([b'\t']);
            hasher.update(self.relations.label(t.relation.0).as_bytes());
            hasher.update([b'\t']);
            hasher.update(self.entities.label(t.tail.0).as_bytes());
            hasher.update([b'\n']);
        }
        hex::encode(hasher.finalize())
    }

    /// Render one triple back to its label form.
    pub fn triple_labels(&self, t: &Triple) -> (String, String, String) {
        (
            self.entities.label(t.head.0).to_string(),
            self.relations.label(t.relation.0).to_string(),
            self.entities.label(t.tail.0).to_string(),
        )
    }
}

/// Incremental knowledge-graph constructor used by the loader, the view
/// filter, and the synthetic generators.
#[derive(Debug)]
pub struct KgBuilder {
    type_source: TypeSource,
    entities: Vocab,
    relations: Vocab,
    types: Vocab,
    entity_types: Vec<NodeTypeId>,
    rows: Vec<(Triple, ViewTag)>,
    seen: HashSet<u128>,
    duplicates: usize,
}

impl KgBuilder {
    pub fn new(type_source: TypeSource) -> Self {
        KgBuilder {
            type_source,
            entities: Vocab::new(),
            relations: Vocab::new(),
            types: Vocab::new(),
            entity_types: Vec::new(),
            rows: Vec::new(),
            seen: HashSet::new(),
            duplicates: 0,
        }
    }

    fn intern_entity(&mut self, label: &str) -> Result<u32, KgError> {
        if let Some(i) = self.entities.get(label) {
            return Ok(i);
        }
        let ty = self
            .type_source
            .resolve(label)
            .ok_or_else(|| KgError::UnresolvableType { label: label.to_string() })?;
        let tid = self.types.intern(&ty) as u16;
        let i = self.entities.intern(label);
        self.entity_types.push(NodeTypeId(tid));
        Ok(i)
    }

    fn intern_entity_typed(&mut self, label: &str, ty: &str) -> u32 {
        if let Some(i) = self.entities.get(label) {
            return i;
        }
        let tid = self.types.intern(ty) as u16;
        let i = self.entities.intern(label);
        self.entity_types.push(NodeTypeId(tid));
        i
    }

    /// Add a triple, resolving node types through the configured source.
    pub fn add(&mut self, head: &str, relation: &str, tail: &str, view: ViewTag) -> Result<(), KgError> {
        let h = self.intern_entity(head)?;
        let t = self.intern_entity(tail)?;
        let r = self.relations.intern(relation);
        self.push_row(Triple::new(EntityId(h), RelationId(r), EntityId(t)), view);
        Ok(())
    }

    /// Add a triple with explicit node types (bypasses the type source).
    pub fn add_typed(
        &mut self,
        head: &str,
        head_type: &str,
        relation: &str,
        tail: &str,
        tail_type: &str,
        view: ViewTag,
    ) {
        let h = self.intern_entity_typed(head, head_type);
        let t = self.intern_entity_typed(tail, tail_type);
        let r = self.relations.intern(relation);
        self.push_row(Triple::new(EntityId(h), RelationId(r), EntityId(t)), view);
    }

    fn push_row(&mut self, triple: Triple, view: ViewTag) {
        debug_assert!(view != ViewTag::Whole, "triples carry a concrete view tag");
        if !self.seen.insert(triple.key()) {
            self.duplicates += 1;
            return;
        }
        self.rows.push((triple, view));
    }

    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn finish(self) -> KnowledgeGraph {
        if self.duplicates > 0 {
            log::info!("dropped {} duplicate triple(s)", self.duplicates);
        }
        let mut rows = self.rows;
        rows.sort_unstable_by_key(|(t, _)| *t);
        let (triples, views): (Vec<Triple>, Vec<ViewTag>) = rows.into_iter().unzip();

        let nrel = self.relations.len();
        let mut head_index: Vec<HashMap<u32, Vec<u32>>> = vec![HashMap::new(); nrel];
        let mut tail_index: Vec<HashMap<u32, Vec<u32>>> = vec![HashMap::new(); nrel];
        let mut rel_type_pairs: Vec<BTreeSet<(u16, u16)>> = vec![BTreeSet::new(); nrel];
        let mut entities_by_type: Vec<Vec<u32>> = vec![Vec::new(); self.types.len()];

        for (e, ty) in self.entity_types.iter().enumerate() {
            entities_by_type[ty.0 as usize].push(e as u32);
        }
        for t in &triples {
            let r = t.relation.0 as usize;
            head_index[r].entry(t.head.0).or_default().push(t.tail.0);
            tail_index[r].entry(t.tail.0).or_default().push(t.head.0);
            rel_type_pairs[r].insert((
                self.entity_types[t.head.0 as usize].0,
                self.entity_types[t.tail.0 as usize].0,
            ));
        }
        for m in head_index.iter_mut().chain(tail_index.iter_mut()) {
            for v in m.values_mut() {
                v.sort_unstable();
                v.dedup();
            }
        }

        KnowledgeGraph {
            entities: self.entities,
            relations: self.relations,
            types: self.types,
            entity_types: self.entity_types,
            triples,
            views,
            head_index,
            tail_index,
            rel_type_pairs,
            entities_by_type,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_kg() -> KnowledgeGraph {
        let mut b = KgBuilder::new(TypeSource::default());
        b.add("G:1", "encodes", "P:1", ViewTag::Instance).unwrap();
        b.add("G:2", "encodes", "P:2", ViewTag::Instance).unwrap();
        b.add("P:1", "isa", "C:root", ViewTag::Ontology).unwrap();
        b.add("G:1", "isa", "C:root", ViewTag::Bridge).unwrap();
        b.finish()
    }

    #[test]
    fn vocab_round_trip() {
        let kg = tiny_kg();
        for i in 0..kg.num_entities() as u32 {
            let label = kg.entity_vocab().label(i);
            assert_eq!(kg.entity_vocab().get(label), Some(i));
        }
    }

    #[test]
    fn duplicates_dropped() {
        let mut b = KgBuilder::new(TypeSource::default());
        b.add("A:1", "r", "B:1", ViewTag::Instance).unwrap();
        b.add("A:1", "r", "B:1", ViewTag::Instance).unwrap();
        b.add("A:1", "r", "B:2", ViewTag::Instance).unwrap();
        assert_eq!(b.duplicates(), 1);
        let kg = b.finish();
        assert_eq!(kg.triples().len(), 2);
    }

    #[test]
    fn view_partition_sums_to_whole() {
        let kg = tiny_kg();
        let o = kg.view_filter(ViewTag::Ontology).triples().len();
        let i = kg.view_filter(ViewTag::Instance).triples().len();
        let b = kg.view_filter(ViewTag::Bridge).triples().len();
        let w = kg.view_filter(ViewTag::Whole).triples().len();
        assert_eq!(o + i + b, w);
        assert_eq!(w, 4);
        assert_eq!(o, 1);
    }

    #[test]
    fn view_filter_shrinks_vocab() {
        let kg = tiny_kg();
        let onto = kg.view_filter(ViewTag::Ontology);
        assert_eq!(onto.num_entities(), 2); // P:1, C:root
        assert_eq!(onto.num_relations(), 1);
    }

    #[test]
    fn candidate_set_covers_observed_slot_entities() {
        let kg = tiny_kg();
        let r = RelationId(kg.relation_vocab().get("encodes").unwrap());
        let tails = kg.candidate_set(r, Slot::Tail).unwrap();
        // all P-typed entities
        let labels: Vec<&str> = tails.iter().map(|e| kg.entity_vocab().label(e.0)).collect();
        assert_eq!(labels, vec!["P:1", "P:2"]);
        let heads = kg.candidate_set(r, Slot::Head).unwrap();
        let labels: Vec<&str> = heads.iter().map(|e| kg.entity_vocab().label(e.0)).collect();
        assert_eq!(labels, vec!["G:1", "G:2"]);
    }

    #[test]
    fn candidate_set_multi_type_relation() {
        let kg = tiny_kg();
        // isa observed P->C and G->C: head candidates are all P and G entities
        let r = RelationId(kg.relation_vocab().get("isa").unwrap());
        let heads = kg.candidate_set(r, Slot::Head).unwrap();
        assert_eq!(heads.len(), 4);
    }

    #[test]
    fn unknown_relation_errors() {
        let kg = tiny_kg();
        assert!(kg.candidate_set(RelationId(99), Slot::Head).is_err());
    }

    #[test]
    fn prefix_type_resolution_fails_without_delimiter() {
        let mut b = KgBuilder::new(TypeSource::default());
        let err = b.add("nocolon", "r", "B:1", ViewTag::Instance).unwrap_err();
        assert!(matches!(err, KgError::UnresolvableType { .. }));
    }
}
