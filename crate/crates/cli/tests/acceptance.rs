//! One line per criterion, then a nonzero exit if any failed.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use treematch::oracle::{exhaustive_edge_in_max, exhaustive_max, exhaustive_tables, greedy_leaf_matching, weighted_dp_matching, TreeEdge};
use treematch::trees::{prufer_decode, random_tree};
use treematch::{ClusterKind, EdgeConstraint, EdgeId, EdgeStatus, Forest, MatchValue, Matching, MatchingForest, Tristate, VertexId};
use treematch_cli::bench::{bench, BenchConfig, BenchOp, BenchRecord};
use treematch_cli::fuzz::{run_fuzz, FuzzConfig};
use treematch_cli::workload::WorkloadKind;

const SAMPLE_LIMIT: Duration = Duration::from_millis(1);
const TABLE_SWEEP_LIMIT: Duration = Duration::from_secs(5 * 60);
const FUZZ_LIMIT: Duration = Duration::from_secs(2 * 60);
const BENCH_LIMIT: Duration = Duration::from_secs(10 * 60);
/// Largest allowed growth of touched clusters per update from one size to
/// the next doubling.
const TOUCHED_STEP: f64 = 16.0;
const LEVEL_STEP: usize = 4;
const CARD_RATIO: f64 = 3.0;

type Check = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn build(edges: &[(u32, u32)], weights: Option<&[u64]>, weighted: bool) -> MatchingForest {
    let list = edges.iter().enumerate().map(|(i, &(a, b))| (VertexId(a), VertexId(b), weights.map_or(1, |w| w[i])));
    let forest = Forest::from_edges(list).expect("a tree");
    MatchingForest::build(forest, if weighted { Matching::weighted() } else { Matching::unweighted() })
}

fn tree_edges(tf: &MatchingForest, ids: &[EdgeId]) -> Vec<TreeEdge> {
    ids.iter()
        .map(|&e| {
            let edge = tf.forest().edge(e).expect("live edge");
            TreeEdge { u: edge.endpoints.0, v: edge.endpoints.1, weight: edge.weight }
        })
        .collect()
}

/// Every labeled tree on `n` vertices, in Prüfer order.
fn all_trees(n: usize) -> Vec<Vec<(u32, u32)>> {
    match n {
        0 | 1 => vec![Vec::new()],
        2 => vec![vec![(0, 1)]],
        _ => (0..n.pow(n as u32 - 2))
            .map(|mut code| {
                let seq: Vec<u32> = (0..n - 2)
                    .map(|_| {
                        let x = code % n;
                        code /= n;
                        x as u32
                    })
                    .collect();
                prufer_decode(&seq, n)
            })
            .collect(),
    }
}

fn sample_tree_updates() -> Outcome {
    let start = Instant::now();
    let mut tf = MatchingForest::new(Matching::unweighted());
    let (a, b, c, d, e, f) = (VertexId(0), VertexId(1), VertexId(2), VertexId(3), VertexId(4), VertexId(5));
    for (x, y) in [(a, c), (b, c), (c, d), (d, e)] {
        tf.link(x, y, 1).expect("tree edge");
    }
    let built = tf.matching_cardinality(a);
    tf.link(d, f, 1).expect("tree edge");
    let linked = tf.matching_cardinality(f);
    tf.cut(d, f).expect("present edge");
    let cut = tf.matching_cardinality(a);
    let elapsed = start.elapsed();
    let two = MatchValue::new(2);
    outcome(
        built == two && linked == two && cut == two && elapsed < SAMPLE_LIMIT,
        format!("card {built}, after link {linked}, after cut {cut}; {elapsed:?}"),
    )
}

fn base_and_level_one_tables() -> Outcome {
    let tf = build(&[(0, 2), (1, 2), (2, 3), (3, 4)], None, false);
    let bases: Vec<String> = tf.level_clusters(0).iter().map(|c| c.table.to_string()).collect();
    let compresses: Vec<String> = tf
        .level_clusters(1)
        .iter()
        .filter(|c| match c.kind {
            ClusterKind::Compress { left, right } => {
                [left, right].iter().all(|&x| matches!(tf.cluster(x).map(|v| v.kind), Some(ClusterKind::Base(_))))
            }
            _ => false,
        })
        .map(|c| c.table.to_string())
        .collect();
    let pass =
        bases.len() == 4 && bases.iter().all(|t| t == "(0,$,$,1)") && !compresses.is_empty() && compresses.iter().all(|t| t == "(0,1,1,$)");
    outcome(pass, format!("bases {bases:?}; base-pair compresses {compresses:?}"))
}

fn table_sweep() -> Outcome {
    let start = Instant::now();
    let (mut trees, mut clusters, mut bad) = (0usize, 0usize, Vec::new());
    for n in 1..=7 {
        for edges in all_trees(n) {
            trees += 1;
            let tf = build(&edges, None, false);
            if let Err(v) = tf.audit() {
                bad.push(format!("n={n} {edges:?}: {v}"));
            }
            for c in tf.clusters() {
                clusters += 1;
                let ids = tf.cluster_edges(c.id).expect("live cluster");
                let want = exhaustive_tables(&tree_edges(&tf, &ids), c.boundary.0, c.boundary.1, false).expect("small cluster");
                if want != c.table {
                    bad.push(format!("n={n} {edges:?}: {} stores {}, enumeration {want}", c.id, c.table));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        bad.is_empty() && trees == 18_249 && elapsed < TABLE_SWEEP_LIMIT,
        format!("{trees} trees, {clusters} clusters, {} mismatches{}; {elapsed:?}", bad.len(), first(&bad)),
    )
}

fn first(msgs: &[String]) -> String {
    msgs.first().map_or(String::new(), |m| format!(" (first: {m})"))
}

fn fuzz_cardinality() -> Outcome {
    let start = Instant::now();
    let cfg = FuzzConfig { n: 512, ops: 100_000, seed: 2024, audit_every: 16, validate_every: 5_000, ..FuzzConfig::default() };
    let r = run_fuzz(&cfg);
    let elapsed = start.elapsed();
    outcome(
        r.ok() && r.links + r.cuts == cfg.ops && r.value_checks == cfg.ops / 16 && elapsed < FUZZ_LIMIT,
        format!(
            "{} links, {} cuts, {} oracle checks, {} audits, {} failures{}; {elapsed:?}",
            r.links,
            r.cuts,
            r.value_checks,
            r.validations,
            r.failures.len(),
            first(&r.failures)
        ),
    )
}

fn tristate(b: bool) -> Tristate {
    if b {
        Tristate::Matched
    } else {
        Tristate::Unmatched
    }
}

fn matched_edge_queries() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut membership, mut constrained, mut bad) = (0usize, 0usize, Vec::new());
    let mut seen = [0usize; 3];
    for _ in 0..1000 {
        let n = rng.gen_range(2..=13);
        let edges = random_tree(n, &mut rng);
        let tf = build(&edges, None, false);
        let ids: Vec<EdgeId> = edges.iter().map(|&(a, b)| tf.forest().find_edge(VertexId(a), VertexId(b)).expect("built edge")).collect();
        let oracle: Vec<TreeEdge> = edges.iter().map(|&(a, b)| TreeEdge::unit(a, b)).collect();
        for (i, &e) in ids.iter().enumerate() {
            membership += 1;
            let got = tf.edge_in_some_maximum(e).map(tristate);
            let want = exhaustive_edge_in_max(&oracle, i, &[], false).expect("small tree");
            if got != Ok(want) {
                bad.push(format!("{edges:?} edge {i}: {got:?} vs {want:?}"));
            }
        }
        for _ in 0..4 {
            let k = rng.gen_range(0..=3.min(edges.len()));
            let picked: Vec<usize> = rand::seq::index::sample(&mut rng, edges.len(), k).into_vec();
            let with: Vec<(usize, EdgeStatus)> =
                picked.iter().map(|&i| (i, *[EdgeStatus::Matched, EdgeStatus::Unmatched].choose(&mut rng).expect("two"))).collect();
            let cons: Vec<EdgeConstraint> = with.iter().map(|&(i, status)| EdgeConstraint { edge: ids[i], status }).collect();
            let q = rng.gen_range(0..edges.len());
            constrained += 1;
            let got = tf.edge_matched_given(&cons, ids[q]);
            let want = exhaustive_edge_in_max(&oracle, q, &with, false).expect("small tree");
            seen[want as usize] += 1;
            if got != Ok(want) {
                bad.push(format!("{edges:?} edge {q} given {with:?}: {got:?} vs {want:?}"));
            }
        }
    }
    outcome(
        bad.is_empty() && seen.iter().all(|&c| c > 0),
        format!(
            "{membership} membership and {constrained} constrained queries ({} matched, {} unmatched, {} infeasible), {} mismatches{}",
            seen[0],
            seen[1],
            seen[2],
            bad.len(),
            first(&bad)
        ),
    )
}

fn weighted_mode() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut bad = Vec::new();
    for _ in 0..10_000 {
        let n = rng.gen_range(1..=200);
        let edges = random_tree(n, &mut rng);
        let weights: Vec<u64> = edges.iter().map(|_| rng.gen_range(0..=100)).collect();
        let tf = build(&edges, Some(&weights), true);
        let oracle: Vec<TreeEdge> = edges.iter().zip(&weights).map(|(&(a, b), &w)| TreeEdge::new(a, b, w)).collect();
        let want = weighted_dp_matching(&oracle);
        let got = tf.matching_cardinality(VertexId(0));
        let expected = if edges.is_empty() { MatchValue::ZERO } else { MatchValue::new(want) };
        if got != expected {
            bad.push(format!("n={n}: root {got}, dp {want}"));
        }
    }
    outcome(bad.is_empty(), format!("10000 trees, {} mismatches{}", bad.len(), first(&bad)))
}

fn greedy_validation() -> Outcome {
    let mut trees: Vec<Vec<(u32, u32)>> = (1..=7).flat_map(all_trees).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..500 {
        let n = rng.gen_range(8..=17);
        trees.push(random_tree(n, &mut rng));
    }
    let mut bad = Vec::new();
    for edges in &trees {
        let oracle: Vec<TreeEdge> = edges.iter().map(|&(a, b)| TreeEdge::unit(a, b)).collect();
        let greedy = greedy_leaf_matching(&oracle);
        let best = exhaustive_max(&oracle, false).expect("at most 16 edges");
        if greedy != best {
            bad.push(format!("{edges:?}: greedy {greedy}, enumeration {best}"));
        }
    }
    outcome(bad.is_empty(), format!("{} trees, {} mismatches{}", trees.len(), bad.len(), first(&bad)))
}

fn log2(n: usize) -> f64 {
    (n as f64).log2()
}

fn scaling() -> Outcome {
    let start = Instant::now();
    let kinds = [WorkloadKind::Path, WorkloadKind::Star, WorkloadKind::Random];
    let sizes: Vec<usize> = (10..=16).map(|k| 1 << k).collect();
    let rows = bench(&kinds, &sizes, 0, &BenchConfig::default());
    let elapsed = start.elapsed();
    let mut problems = Vec::new();
    let mut summary = Vec::new();
    for kind in kinds {
        let of = |op: BenchOp| -> Vec<&BenchRecord> { rows.iter().filter(|r| r.kind == kind.name() && r.op == op.name()).collect() };
        let card = of(BenchOp::Card);
        for pair in card.windows(2) {
            if pair[1].levels > pair[0].levels + LEVEL_STEP {
                problems.push(format!("{} levels {} -> {} at n={}", kind.name(), pair[0].levels, pair[1].levels, pair[1].n));
            }
        }
        for r in &card {
            if r.levels as f64 > 4.0 * log2(r.n) + 4.0 {
                problems.push(format!("{} n={} has {} levels", kind.name(), r.n, r.levels));
            }
        }
        for op in [BenchOp::Link, BenchOp::Cut] {
            let rs = of(op);
            for r in &rs {
                if r.touched_per_op > 64.0 * (log2(r.n) + 1.0) {
                    problems.push(format!("{} {} n={} touches {:.1}", kind.name(), op.name(), r.n, r.touched_per_op));
                }
            }
            for pair in rs.windows(2) {
                if pair[1].touched_per_op - pair[0].touched_per_op > TOUCHED_STEP {
                    problems.push(format!(
                        "{} {} touched {:.1} -> {:.1} at n={}",
                        kind.name(),
                        op.name(),
                        pair[0].touched_per_op,
                        pair[1].touched_per_op,
                        pair[1].n
                    ));
                }
            }
        }
        let (small, large) = (card.first().expect("rows"), card.last().expect("rows"));
        let ratio = large.ns_per_op / small.ns_per_op;
        if ratio > CARD_RATIO {
            problems.push(format!("{} card {:.1} ns -> {:.1} ns", kind.name(), small.ns_per_op, large.ns_per_op));
        }
        let touched = |op: BenchOp| of(op).last().map_or(0.0, |r| r.touched_per_op);
        summary.push(format!(
            "{}: levels {}..{}, touched at 2^16 {:.1}/{:.1}, card x{ratio:.2}",
            kind.name(),
            small.levels,
            large.levels,
            touched(BenchOp::Link),
            touched(BenchOp::Cut)
        ));
    }
    if elapsed >= BENCH_LIMIT {
        problems.push(format!("bench took {elapsed:?}"));
    }
    outcome(problems.is_empty(), format!("{}; {elapsed:?}{}", summary.join("; "), first(&problems)))
}

fn rebuild_equivalence() -> Outcome {
    let cfg = FuzzConfig { n: 512, ops: 100_000, seed: 99, audit_every: 0, rebuild_every: 1_000, ..FuzzConfig::default() };
    let r = run_fuzz(&cfg);
    outcome(
        r.ok() && r.rebuilds == 100,
        format!("{} rebuilds over {} ops, {} failures{}", r.rebuilds, r.links + r.cuts, r.failures.len(), first(&r.failures)),
    )
}

fn main() {
    let criteria: [Check; 9] = [
        ("1 sample tree link and cut", sample_tree_updates),
        ("2 base and level-1 tables", base_and_level_one_tables),
        ("3 tables on every tree up to 7 vertices", table_sweep),
        ("4 fuzz cardinality vs greedy", fuzz_cardinality),
        ("5 matched-edge queries vs enumeration", matched_edge_queries),
        ("6 weighted root vs dp", weighted_mode),
        ("7 greedy vs enumeration", greedy_validation),
        ("8 scaling", scaling),
        ("9 rebuild equivalence", rebuild_equivalence),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
