mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{build, component_tree, table_mismatches};
use treematch::oracle::{exhaustive_edge_in_max, exhaustive_max, greedy_leaf_matching, weighted_dp_matching, TreeEdge};
use treematch::trees::{prufer_decode, random_tree};
use treematch::{EdgeConstraint, EdgeId, EdgeStatus, MatchValue, Tristate, VertexId};

#[test]
fn every_labeled_tree_up_to_six_vertices() {
    for n in 2..=6usize {
        let count = n.pow(n as u32 - 2);
        for code in 0..count {
            let mut c = code;
            let seq: Vec<u32> = (0..n - 2)
                .map(|_| {
                    let x = c % n;
                    c /= n;
                    x as u32
                })
                .collect();
            let tf = build(&prufer_decode(&seq, n), None, false);
            tf.audit().unwrap();
            let bad = table_mismatches(&tf);
            assert!(bad.is_empty(), "n={n} seq={seq:?}: {bad:?}");
        }
    }
}

#[test]
fn random_sixteen_edge_trees_tables() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..60 {
        let n = rng.gen_range(2..=17);
        let tf = build(&random_tree(n, &mut rng), None, false);
        tf.audit().unwrap();
        assert!(table_mismatches(&tf).is_empty());
    }
}

#[test]
fn weighted_tables_small_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..300 {
        let n = rng.gen_range(2..=10);
        let edges = random_tree(n, &mut rng);
        let weights: Vec<u64> = edges.iter().map(|_| rng.gen_range(0..=100)).collect();
        let tf = build(&edges, Some(&weights), true);
        tf.audit().unwrap();
        assert!(table_mismatches(&tf).is_empty());
    }
}

#[test]
fn membership_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for round in 0..300 {
        let n = rng.gen_range(2..=13);
        let edges = random_tree(n, &mut rng);
        let weighted = round % 3 == 0;
        let weights: Vec<u64> = edges.iter().map(|_| rng.gen_range(0..=5)).collect();
        let tf = build(&edges, Some(&weights), weighted);
        let tree = component_tree(&tf, VertexId(0));
        let ids: Vec<EdgeId> = tf.forest().edges().map(|e| e.id).collect();
        let idx = |e: EdgeId| {
            tree.iter()
                .position(|t| {
                    let (a, b) = tf.forest().edge(e).unwrap().endpoints;
                    (t.u, t.v) == (a, b)
                })
                .unwrap()
        };
        for &e in &ids {
            let expect = exhaustive_edge_in_max(&tree, idx(e), &[], weighted).unwrap();
            assert_eq!(tf.edge_in_some_maximum(e).unwrap(), expect == Tristate::Matched, "{edges:?} e={e}");
            assert_eq!(tf.edge_matched_given(&[], e).unwrap(), expect);
        }
        for _ in 0..4 {
            let k = rng.gen_range(1..=3);
            let cons: Vec<EdgeConstraint> = (0..k)
                .map(|_| EdgeConstraint {
                    edge: ids[rng.gen_range(0..ids.len())],
                    status: if rng.gen_bool(0.5) { EdgeStatus::Matched } else { EdgeStatus::Unmatched },
                })
                .collect();
            let oc: Vec<_> = cons.iter().map(|c| (idx(c.edge), c.status)).collect();
            for &e in &ids {
                let expect = exhaustive_edge_in_max(&tree, idx(e), &oc, weighted).unwrap();
                assert_eq!(tf.edge_matched_given(&cons, e).unwrap(), expect, "{edges:?} {cons:?} e={e}");
            }
        }
    }
}

#[test]
fn removing_a_never_matched_edge_keeps_cardinality() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..100 {
        let n = rng.gen_range(2..=30);
        let mut tf = build(&random_tree(n, &mut rng), None, false);
        let before = tf.matching_cardinality(VertexId(0));
        let edges: Vec<_> = tf.forest().edges().copied().collect();
        assert!(edges.iter().any(|e| tf.edge_in_some_maximum(e.id).unwrap()));
        for e in edges {
            if !tf.edge_in_some_maximum(e.id).unwrap() {
                let (a, b) = e.endpoints;
                tf.cut(a, b).unwrap();
                let after = tf.matching_cardinality(a).get().unwrap() + tf.matching_cardinality(b).get().unwrap();
                assert_eq!(MatchValue::new(after), before);
                tf.link(a, b, e.weight).unwrap();
            }
        }
    }
}

#[test]
fn root_value_matches_dp_and_greedy() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..400 {
        let n = rng.gen_range(1..=200);
        let edges = random_tree(n, &mut rng);
        let weights: Vec<u64> = edges.iter().map(|_| rng.gen_range(0..=100)).collect();
        let tree: Vec<TreeEdge> = edges.iter().zip(&weights).map(|(&(a, b), &w)| TreeEdge::new(a, b, w)).collect();
        let tf = build(&edges, Some(&weights), true);
        assert_eq!(tf.total_value(), weighted_dp_matching(&tree));
        let tf = build(&edges, None, false);
        assert_eq!(tf.total_value(), greedy_leaf_matching(&tree));
        if edges.len() <= 12 {
            assert_eq!(exhaustive_max(&tree, true).unwrap(), weighted_dp_matching(&tree));
        }
    }
}
