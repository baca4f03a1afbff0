#![allow(dead_code)]

use treematch::oracle::TreeEdge;
use treematch::{ClusterView, EdgeId, Forest, MatchTable, Matching, MatchingForest, VertexId};

pub fn build(edges: &[(u32, u32)], weights: Option<&[u64]>, weighted: bool) -> MatchingForest {
    let mut f = Forest::new();
    for (i, &(a, b)) in edges.iter().enumerate() {
        let w = weights.map_or(1, |ws| ws[i]);
        f.insert_edge(VertexId(a), VertexId(b), w).unwrap();
    }
    let ann = if weighted { Matching::weighted() } else { Matching::unweighted() };
    MatchingForest::build(f, ann)
}

pub fn tree_edges(tf: &MatchingForest, ids: &[EdgeId]) -> Vec<TreeEdge> {
    ids.iter()
        .map(|&e| {
            let edge = tf.forest().edge(e).unwrap();
            TreeEdge { u: edge.endpoints.0, v: edge.endpoints.1, weight: edge.weight }
        })
        .collect()
}

pub fn component_tree(tf: &MatchingForest, v: VertexId) -> Vec<TreeEdge> {
    tf.forest().component_edges(v).iter().map(|e| TreeEdge { u: e.endpoints.0, v: e.endpoints.1, weight: e.weight }).collect()
}

/// Every cluster's table against enumeration; returns the offenders.
pub fn table_mismatches(tf: &MatchingForest) -> Vec<(ClusterView<MatchTable>, MatchTable)> {
    let weighted = tf.annotation().weighted;
    let mut bad = Vec::new();
    for c in tf.clusters() {
        let ids = tf.cluster_edges(c.id).unwrap();
        let edges = tree_edges(tf, &ids);
        let expect = treematch::oracle::exhaustive_tables(&edges, c.boundary.0, c.boundary.1, weighted).unwrap();
        if expect != c.table {
            bad.push((c, expect));
        }
    }
    bad
}
