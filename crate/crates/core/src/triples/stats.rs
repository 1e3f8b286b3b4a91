//! Per-node-type scale statistics.
//!
//! An edge is incident to both endpoint types; an edge whose endpoints share
//! a type counts once for that type. Average degree is incident edges divided
//! by node count, so a single edge between two nodes of one type gives that
//! type an average degree of 0.5.

use serde::{Deserialize, Serialize};

use super::{KnowledgeGraph, ViewTag};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TypeStats {
    pub name: String,
    pub nodes: usize,
    pub incident_edges: usize,
    pub avg_degree: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RelationStats {
    pub name: String,
    pub triples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StatsReport {
    pub per_type: Vec<TypeStats>,
    pub per_relation: Vec<RelationStats>,
    pub per_view: Vec<(ViewTag, usize)>,
    pub total_entities: usize,
    pub total_triples: usize,
}

impl KnowledgeGraph {
    pub fn stats(&self) -> StatsReport {
        let ntypes = self.num_types();
        let mut incident = vec![0usize; ntypes];
        let mut rel_counts = vec![0usize; self.num_relations()];
        let mut view_counts = [0usize; 3];

        for (t, view) in self.triples().iter().zip(self.views()) {
            let ht = self.entity_type(t.head).0 as usize;
            let tt = self.entity_type(t.tail).0 as usize;
            incident[ht] += 1;
            if tt != ht {
                incident[tt] += 1;
            }
            rel_counts[t.relation.0 as usize] += 1;
            match view {
                ViewTag::Ontology => view_counts[0] += 1,
                ViewTag::Instance => view_counts[1] += 1,
                ViewTag::Bridge => view_counts[2] += 1,
                ViewTag::Whole => unreachable!("stored triples carry concrete tags"),
            }
        }

        let mut per_type: Vec<TypeStats> = (0..ntypes)
            .map(|i| {
                let nodes = self.entities_of_type(super::NodeTypeId(i as u16)).len();
                let edges = incident[i];
                TypeStats {
                    name: self.type_vocab().label(i as u32).to_string(),
                    nodes,
                    incident_edges: edges,
                    avg_degree: if nodes == 0 { 0.0 } else { edges as f64 / nodes as f64 },
                }
            })
            .collect();
        per_type.sort_by(|a, b| a.name.cmp(&b.name));

        let mut per_relation: Vec<RelationStats> = rel_counts
            .iter()
            .enumerate()
            .map(|(i, &c)| RelationStats { name: self.relation_vocab().label(i as u32).to_string(), triples: c })
            .collect();
        per_relation.sort_by(|a, b| a.name.cmp(&b.name));

        StatsReport {
            per_type,
            per_relation,
            per_view: vec![
                (ViewTag::Ontology, view_counts[0]),
                (ViewTag::Instance, view_counts[1]),
                (ViewTag::Bridge, view_counts[2]),
            ],
            total_entities: self.num_entities(),
            total_triples: self.triples().len(),
        }
    }
}

impl StatsReport {
    /// Fixed-width table, one row per node type plus a totals row.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<24} {:>12} {:>14} {:>12}\n",
            "Category", "Nodes", "Edges", "Avg degree"
        ));
        for row in &self.per_type {
            out.push_str(&format!(
                "{:<24} {:>12} {:>14} {:>12.1}\n",
                row.name, row.nodes, row.incident_edges, row.avg_degree
            ));
        }
        out.push_str(&format!(
            "{:<24} {:>12} {:>14} {:>12}\n",
            "Total", self.total_entities, self.total_triples, "-"
        ));
        out.push_str(&format!(
            "\nViews: ontology {}, instance {}, bridge {} | relation types: {}\n",
            self.per_view[0].1,
            self.per_view[1].1,
            self.per_view[2].1,
            self.per_relation.len()
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::triples::{KgBuilder, TypeSource};

    #[test]
    fn self_typed_edge_counts_once() {
        let mut b = KgBuilder::new(TypeSource::default());
        b.add("X:1", "r", "X:2", ViewTag::Instance).unwrap();
        let s = b.finish().stats();
        assert_eq!(s.per_type.len(), 1);
        assert_eq!(s.per_type[0].nodes, 2);
        assert_eq!(s.per_type[0].incident_edges, 1);
        assert!((s.per_type[0].avg_degree - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cross_type_edge_counts_for_both() {
        let mut b = KgBuilder::new(TypeSource::default());
        b.add("X:1", "r", "Y:1", ViewTag::Instance).unwrap();
        let s = b.finish().stats();
        let total_incident: usize = s.per_type.iter().map(|t| t.incident_edges).sum();
        assert_eq!(total_incident, 2);
        assert_eq!(s.total_triples, 1);
    }

    #[test]
    fn totals_are_sums() {
        let mut b = KgBuilder::new(TypeSource::default());
        b.add("X:1", "r", "Y:1", ViewTag::Instance).unwrap();
        b.add("X:2", "r", "Y:1", ViewTag::Ontology).unwrap();
        b.add("Y:2", "s", "Y:1", ViewTag::Bridge).unwrap();
        let s = b.finish().stats();
        let node_sum: usize = s.per_type.iter().map(|t| t.nodes).sum();
        assert_eq!(node_sum, s.total_entities);
        let rel_sum: usize = s.per_relation.iter().map(|r| r.triples).sum();
        assert_eq!(rel_sum, s.total_triples);
        let view_sum: usize = s.per_view.iter().map(|(_, c)| c).sum();
        assert_eq!(view_sum, s.total_triples);
    }

    #[test]
    fn json_round_trip() {
        let mut b = KgBuilder::new(TypeSource::default());
        b.add("X:1", "r", "Y:1", ViewTag::Instance).unwrap();
        let s = b.finish().stats();
        let json = serde_json::to_string(&s).unwrap();
        let back: StatsReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }
}
