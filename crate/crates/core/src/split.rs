//! Connectivity-preserving train/valid/test splitting.
//!
//! Components of the undirected projection with more than
//! `min_component_size` nodes are retained; each retained component
//! contributes its spanning tree to the training set, and
//! `floor(holdout_fraction * non_tree_edges)` of its remaining edges are held
//! out, pooled, and split evenly between validation and test (validation gets
//! the extra edge on odd counts). Smaller components are excluded wholly.
//!
//! The spanning tree is a breadth-first tree from each component's
//! lowest-index node with neighbors visited in ascending index order, so it
//! is independent of the seed; the seed only drives holdout selection.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::triples::{EntityId, KnowledgeGraph, Triple};

#[derive(Debug, thiserror::Error)]
pub enum SplitError {
    #[error("holdout fraction {0} outside [0, 1]")]
    BadFraction(f64),
    #[error("component is not connected")]
    ComponentNotConnected,
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitConfig {
    pub holdout_fraction: f64,
    pub min_component_size: usize,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        // up to 20% of non-tree edges held out; components of more than 10
        // nodes retained
        SplitConfig { holdout_fraction: 0.20, min_component_size: 10, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ComponentRecord {
    pub nodes: usize,
    pub tree_edges: usize,
    pub non_tree_edges: usize,
    pub held_out: usize,
}

/// Train/valid/test partitions plus the excluded small-component triples.
#[derive(Debug, Clone)]
pub struct SplitDataset {
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
    pub excluded: Vec<Triple>,
    pub seed: u64,
    pub holdout_fraction: f64,
    pub min_component_size: usize,
    pub components: Vec<ComponentRecord>,
}

/// Undirected adjacency (self-loops skipped, parallel edges collapsed).
fn adjacency(kg: &KnowledgeGraph) -> Vec<Vec<u32>> {
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); kg.num_entities()];
    for t in kg.triples() {
        if t.head != t.tail {
            adj[t.head.0 as usize].push(t.tail.0);
            adj[t.tail.0 as usize].push(t.head.0);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    adj
}

/// Connected components of the undirected projection, each sorted, ordered
/// by their smallest entity id. Isolated vocabulary entries (no incident
/// triples) still form singleton components.
pub fn connected_components(kg: &KnowledgeGraph) -> Vec<Vec<EntityId>> {
    let n = kg.num_entities();
    let adj = adjacency(kg);
    let mut seen = vec![false; n];
    let mut components = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut comp = vec![start as u32];
        seen[start] = true;
        let mut queue = std::collections::VecDeque::from([start as u32]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u as usize] {
                if !seen[v as usize] {
                    seen[v as usize] = true;
                    comp.push(v);
                    queue.push_back(v);
                }
            }
        }
        comp.sort_unstable();
        components.push(comp.into_iter().map(EntityId).collect());
    }
    components
}

/// Lowest triple (by relation, head, tail) joining each unordered node pair.
fn pair_representatives(kg: &KnowledgeGraph) -> HashMap<(u32, u32), Triple> {
    let mut reps: HashMap<(u32, u32), Triple> = HashMap::new();
    for t in kg.triples() {
        if t.head == t.tail {
            continue;
        }
        let key = (t.head.0.min(t.tail.0), t.head.0.max(t.tail.0));
        let cand = (t.relation.0, t.head.0, t.tail.0);
        match reps.get(&key) {
            Some(prev) if (prev.relation.0, prev.head.0, prev.tail.0) <= cand => {}
            _ => {
                reps.insert(key, *t);
            }
        }
    }
    reps
}

/// Breadth-first spanning tree of one connected component: exactly
/// `|component| - 1` triples, one per discovered node; with parallel edges,
/// the lowest (relation, head, tail) triple represents the pair.
pub fn spanning_tree(kg: &KnowledgeGraph, component: &[EntityId]) -> Result<Vec<Triple>, SplitError> {
    if component.len() <= 1 {
        return Ok(Vec::new());
    }
    let adj = adjacency(kg);
    let reps = pair_representatives(kg);
    let member: std::collections::HashSet<u32> = component.iter().map(|e| e.0).collect();
    let start = component.iter().map(|e| e.0).min().expect("non-empty");

    let mut tree = Vec::with_capacity(component.len() - 1);
    let mut seen: std::collections::HashSet<u32> = std::collections::HashSet::from([start]);
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u as usize] {
            if member.contains(&v) && seen.insert(v) {
                let key = (u.min(v), u.max(v));
                tree.push(reps[&key]);
                queue.push_back(v);
            }
        }
    }
    if seen.len() != component.len() {
        return Err(SplitError::ComponentNotConnected);
    }
    Ok(tree)
}

/// Produce the split. Deterministic: identical inputs and seed give an
/// identical result.
pub fn split(kg: &KnowledgeGraph, cfg: &SplitConfig) -> Result<SplitDataset, SplitError> {
    if !(0.0..=1.0).contains(&cfg.holdout_fraction) {
        return Err(SplitError::BadFraction(cfg.holdout_fraction));
    }

    let components = connected_components(kg);
    // component id per entity for grouping triples
    let mut comp_of = vec![usize::MAX; kg.num_entities()];
    for (ci, comp) in components.iter().enumerate() {
        for e in comp {
            comp_of[e.0 as usize] = ci;
        }
    }
    let mut comp_triples: Vec<Vec<Triple>> = vec![Vec::new(); components.len()];
    for t in kg.triples() {
        comp_triples[comp_of[t.head.0 as usize]].push(*t);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut train = Vec::new();
    let mut excluded = Vec::new();
    let mut holdout_pool: Vec<Triple> = Vec::new();
    let mut records = Vec::new();

    for (ci, comp) in components.iter().enumerate() {
        let triples = &comp_triples[ci];
        if comp.len() <= cfg.min_component_size {
            excluded.extend_from_slice(triples);
            continue;
        }
        let tree = spanning_tree(kg, comp)?;
        let tree_keys: std::collections::HashSet<u128> = tree.iter().map(Triple::key).collect();
        let mut non_tree: Vec<Triple> =
            triples.iter().filter(|t| !tree_keys.contains(&t.key())).copied().collect();
        non_tree.sort_unstable(); // seed-independent base order before shuffling
        let held = (cfg.holdout_fraction * non_tree.len() as f64).floor() as usize;
        non_tree.shuffle(&mut rng);
        records.push(ComponentRecord {
            nodes: comp.len(),
            tree_edges: tree.len(),
            non_tree_edges: non_tree.len(),
            held_out: held,
        });
        train.extend_from_slice(&tree);
        holdout_pool.extend_from_slice(&non_tree[..held]);
        train.extend_from_slice(&non_tree[held..]);
    }

    // alternate assignment: valid takes the extra edge on odd counts
    let mut valid = Vec::new();
    let mut test = Vec::new();
    for (i, t) in holdout_pool.into_iter().enumerate() {
        if i % 2 == 0 {
            valid.push(t);
        } else {
            test.push(t);
        }
    }

    for list in [&mut train, &mut valid, &mut test, &mut excluded] {
        list.sort_unstable();
    }

    Ok(SplitDataset {
        train,
        valid,
        test,
        excluded,
        seed: cfg.seed,
        holdout_fraction: cfg.holdout_fraction,
        min_component_size: cfg.min_component_size,
        components: records,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub holdout_fraction: f64,
    pub min_component_size: usize,
    pub train_triples: usize,
    pub valid_triples: usize,
    pub test_triples: usize,
    pub excluded_triples: usize,
    pub components: Vec<ComponentRecord>,
    pub digests: BTreeMap<String, String>,
}

fn render_triples(kg: &KnowledgeGraph, triples: &[Triple]) -> String {
    let views: HashMap<u128, crate::triples::ViewTag> = kg
        .triples()
        .iter()
        .zip(kg.views())
        .map(|(t, v)| (t.key(), *v))
        .collect();
    let mut out = String::new();
    for t in triples {
        let (h, r, tl) = kg.triple_labels(t);
        let view = views[&t.key()];
        out.push_str(&format!("{h}\t{r}\t{tl}\t{view}\n"));
    }
    out
}

/// Write train/valid/test/excluded files in the loader's format plus a JSON
/// manifest, returning the manifest.
pub fn write_split_files(
    dir: &Path,
    kg: &KnowledgeGraph,
    ds: &SplitDataset,
) -> Result<SplitManifest, SplitError> {
    let io = |path: &Path, source| SplitError::Io { path: path.to_path_buf(), source };
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut digests = BTreeMap::new();
    for (name, triples) in [
        ("train.txt", &ds.train),
        ("valid.txt", &ds.valid),
        ("test.txt", &ds.test),
        ("excluded.txt", &ds.excluded),
    ] {
        let path = dir.join(name);
        let body = render_triples(kg, triples);
        fs::write(&path, &body).map_err(|e| io(&path, e))?;
        digests.insert(name.to_string(), hex::encode(Sha256::digest(body.as_bytes())));
    }
    let manifest = SplitManifest {
        seed: ds.seed,
        holdout_fraction: ds.holdout_fraction,
        min_component_size: ds.min_component_size,
        train_triples: ds.train.len(),
        valid_triples: ds.valid.len(),
        test_triples: ds.test.len(),
        excluded_triples: ds.excluded.len(),
        components: ds.components.clone(),
        digests,
    };
    let path = dir.join("split-manifest.json");
    let body = serde_json::to_string_pretty(&manifest).expect("serializable");
    fs::write(&path, body).map_err(|e| io(&path, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::triples::{KgBuilder, TypeSource, ViewTag};

    fn kg_from_edges(edges: &[(u32, &str, u32)]) -> KnowledgeGraph {
        let mut b = KgBuilder::new(TypeSource::default());
        for (h, r, t) in edges {
            b.add(&format!("N:{h}"), r, &format!("N:{t}"), ViewTag::Instance).unwrap();
        }
        b.finish()
    }

    #[test]
    fn two_triangles_two_components() {
        let kg = kg_from_edges(&[(0, "r", 1), (1, "r", 2), (2, "r", 0), (3, "r", 4), (4, "r", 5), (5, "r", 3)]);
        let comps = connected_components(&kg);
        assert_eq!(comps.len(), 2);
        assert!(comps.iter().all(|c| c.len() == 3));
        let total: usize = comps.iter().map(Vec::len).sum();
        assert_eq!(total, kg.num_entities());
    }

    #[test]
    fn empty_kg_has_no_components() {
        let kg = KgBuilder::new(TypeSource::default()).finish();
        assert!(connected_components(&kg).is_empty());
        let ds = split(&kg, &SplitConfig::default()).unwrap();
        assert!(ds.train.is_empty() && ds.valid.is_empty() && ds.test.is_empty());
    }

    #[test]
    fn path_graph_single_component() {
        let edges: Vec<(u32, &str, u32)> = (0..11).map(|i| (i, "r", i + 1)).collect();
        let kg = kg_from_edges(&edges);
        let comps = connected_components(&kg);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].len(), 12);
    }

    #[test]
    fn triangle_tree_has_two_edges() {
        let kg = kg_from_edges(&[(0, "r", 1), (1, "r", 2), (2, "r", 0)]);
        let comps = connected_components(&kg);
        let tree = spanning_tree(&kg, &comps[0]).unwrap();
        assert_eq!(tree.len(), 2);
    }

    #[test]
    fn tree_shaped_component_is_its_own_tree() {
        let edges: Vec<(u32, &str, u32)> = (1..12).map(|i| ((i - 1) / 2, "r", i)).collect();
        let kg = kg_from_edges(&edges);
        let comps = connected_components(&kg);
        let tree = spanning_tree(&kg, &comps[0]).unwrap();
        assert_eq!(tree.len(), 11);
        let mut got = tree.clone();
        got.sort_unstable();
        assert_eq!(got.as_slice(), kg.triples());
    }

    #[test]
    fn parallel_edges_one_tree_edge() {
        let kg = kg_from_edges(&[(0, "a", 1), (0, "b", 1), (0, "c", 1)]);
        let comps = connected_components(&kg);
        let tree = spanning_tree(&kg, &comps[0]).unwrap();
        assert_eq!(tree.len(), 1);
    }

    #[test]
    fn disconnected_component_rejected() {
        let kg = kg_from_edges(&[(0, "r", 1), (2, "r", 3)]);
        let fake: Vec<EntityId> = (0..4).map(EntityId).collect();
        assert!(matches!(spanning_tree(&kg, &fake), Err(SplitError::ComponentNotConnected)));
    }

    /// 12 nodes, 11-edge spanning tree + 10 extra edges, holdout 0.2
    /// -> train 19, valid 1, test 1.
    #[test]
    fn spec_arithmetic_example() {
        let mut edges: Vec<(u32, &str, u32)> = (0..11).map(|i| (i, "r", i + 1)).collect();
        // 10 extra edges between non-adjacent nodes
        edges.extend([
            (0u32, "x", 2u32),
            (0, "x", 3),
            (0, "x", 4),
            (0, "x", 5),
            (0, "x", 6),
            (0, "x", 7),
            (0, "x", 8),
            (0, "x", 9),
            (0, "x", 10),
            (0, "x", 11),
        ]);
        let kg = kg_from_edges(&edges);
        assert_eq!(kg.triples().len(), 21);
        let ds = split(&kg, &SplitConfig { holdout_fraction: 0.2, min_component_size: 10, seed: 7 }).unwrap();
        assert_eq!(ds.train.len(), 19);
        assert_eq!(ds.valid.len(), 1);
        assert_eq!(ds.test.len(), 1);
        assert!(ds.excluded.is_empty());
        // brute-force recount: partition must cover the input exactly
        let mut all: Vec<Triple> = ds
            .train
            .iter()
            .chain(&ds.valid)
            .chain(&ds.test)
            .chain(&ds.excluded)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all.as_slice(), kg.triples());
    }

    #[test]
    fn small_component_wholly_excluded() {
        let kg = kg_from_edges(&[(0, "r", 1), (1, "r", 2), (2, "r", 3), (3, "r", 4)]);
        let ds = split(&kg, &SplitConfig::default()).unwrap();
        assert!(ds.train.is_empty() && ds.valid.is_empty() && ds.test.is_empty());
        assert_eq!(ds.excluded.len(), 4);
    }

    #[test]
    fn zero_fraction_keeps_everything_in_train() {
        let edges: Vec<(u32, &str, u32)> = (0..11)
            .map(|i| (i, "r", i + 1))
            .chain((0..5).map(|i| (i, "x", i + 6)))
            .collect();
        let kg = kg_from_edges(&edges);
        let ds = split(&kg, &SplitConfig { holdout_fraction: 0.0, min_component_size: 10, seed: 1 }).unwrap();
        assert!(ds.valid.is_empty() && ds.test.is_empty());
        assert_eq!(ds.train.len(), kg.triples().len());
    }

    #[test]
    fn deterministic_per_seed() {
        let edges: Vec<(u32, &str, u32)> = (0..30)
            .map(|i| (i, "r", (i + 1) % 30))
            .chain((0..20).map(|i| (i, "x", (i + 9) % 30)))
            .collect();
        let kg = kg_from_edges(&edges);
        let cfg = SplitConfig { holdout_fraction: 0.3, min_component_size: 10, seed: 99 };
        let a = split(&kg, &cfg).unwrap();
        let b = split(&kg, &cfg).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.valid, b.valid);
        assert_eq!(a.test, b.test);
        let c = split(&kg, &SplitConfig { seed: 100, ..cfg }).unwrap();
        assert!(a.valid != c.valid || a.test != c.test);
    }

    #[test]
    fn fraction_out_of_range_rejected() {
        let kg = kg_from_edges(&[(0, "r", 1)]);
        assert!(matches!(
            split(&kg, &SplitConfig { holdout_fraction: 1.5, ..Default::default() }),
            Err(SplitError::BadFraction(_))
        ));
    }
}
