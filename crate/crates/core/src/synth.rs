//! Synthetic graphs for sanity checks and benchmarks.

use crate::triples::{KgBuilder, KnowledgeGraph, TypeSource, ViewTag};

/// Hierarchy over `num_nodes` entities with the given branching factor
/// (generalized heap indexing: node 0 is the root, node i's parent is
/// (i-1)/branching). Every parent-child pair yields a `has_child` triple and
/// every depth-2 pair a `has_grandchild` triple, so the grandchild relation
/// is exactly the composition of the child relation with itself. Branching 1
/// gives a linear hierarchy (chain).
pub fn hierarchy_kg(num_nodes: usize, branching: usize) -> KnowledgeGraph {
    assert!(num_nodes >= 4, "hierarchy needs at least two levels");
    assert!(branching >= 1);
    let mut b = KgBuilder::new(TypeSource::default());
    let label = |i: usize| format!("N:{i}");
    for i in 1..num_nodes {
        let parent = (i - 1) / branching;
        b.add(&label(parent), "has_child", &label(i), ViewTag::Ontology).unwrap();
        if parent >= 1 {
            let grandparent = (parent - 1) / branching;
            b.add(&label(grandparent), "has_grandchild", &label(i), ViewTag::Ontology).unwrap();
        }
    }
    b.finish()
}

/// Complete binary tree of the given depth (depth 5 = 63 nodes) with the
/// same child/grandchild relation pair.
pub fn tree_kg(depth: u32) -> KnowledgeGraph {
    hierarchy_kg((1usize << (depth + 1)) - 1, 2)
}

/// Random typed multigraph for splitter stress tests: `num_nodes` entities
/// over three node types, `num_edges` triples over `num_relations` relation
/// labels, drawn with the given seed. Parallel edges and self-loops occur.
pub fn random_multigraph(num_nodes: usize, num_edges: usize, num_relations: usize, seed: u64) -> KnowledgeGraph {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = KgBuilder::new(TypeSource::default());
    let label = |i: usize| format!("T{}:{i}", i % 3);
    for _ in 0..num_edges {
        let h = rng.random_range(0..num_nodes);
        let t = rng.random_range(0..num_nodes);
        let r = rng.random_range(0..num_relations);
        b.add(&label(h), &format!("r{r}"), &label(t), ViewTag::Instance).unwrap();
    }
    b.finish()
}
