//! Scaling measurements: update cost, touched clusters, level count and
//! query latency per tree shape and size.

use std::hint::black_box;
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use treematch::{Forest, Matching, MatchingForest, VertexId};

use crate::workload::WorkloadKind;

pub const CSV_HEADER: [&str; 8] = ["kind", "n", "op", "count", "total_ns", "ns_per_op", "touched_per_op", "levels"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, clap::ValueEnum)]
pub enum BenchOp {
    Link,
    Cut,
    Card,
}

impl BenchOp {
    pub const ALL: [BenchOp; 3] = [BenchOp::Link, BenchOp::Cut, BenchOp::Card];

    pub fn name(self) -> &'static str {
        match self {
            BenchOp::Link => "link",
            BenchOp::Cut => "cut",
            BenchOp::Card => "card",
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub ops: Vec<BenchOp>,
    /// Cuts (and as many links) per configuration.
    pub updates: usize,
    pub queries: usize,
    /// Query loops are repeated and the fastest kept.
    pub query_repeats: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { ops: BenchOp::ALL.to_vec(), updates: 10_000, queries: 100_000, query_repeats: 5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRecord {
    pub kind: String,
    pub n: usize,
    pub op: String,
    pub count: usize,
    pub total_ns: u64,
    pub ns_per_op: f64,
    pub touched_per_op: f64,
    pub levels: usize,
}

fn record(kind: WorkloadKind, n: usize, op: BenchOp, count: usize, ns: u64, touched: usize, levels: usize) -> BenchRecord {
    let per = |x: f64| if count == 0 { 0.0 } else { x / count as f64 };
    BenchRecord {
        kind: kind.name().to_string(),
        n,
        op: op.name().to_string(),
        count,
        total_ns: ns,
        ns_per_op: per(ns as f64),
        touched_per_op: per(touched as f64),
        levels,
    }
}

/// One record per (kind, n, op), in the order given.
pub fn bench(kinds: &[WorkloadKind], sizes: &[usize], seed: u64, cfg: &BenchConfig) -> Vec<BenchRecord> {
    let mut out = Vec::new();
    for &kind in kinds {
        for &n in sizes {
            out.extend(bench_one(kind, n, seed, cfg));
        }
    }
    out
}

pub fn bench_one(kind: WorkloadKind, n: usize, seed: u64, cfg: &BenchConfig) -> Vec<BenchRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (n as u64).rotate_left(17) ^ kind as u64);
    let edges = kind.tree(n, &mut rng);
    let mut forest = Forest::from_edges(edges.iter().map(|&(u, v)| (VertexId(u), VertexId(v), 1))).expect("generated tree");
    forest.ensure_vertex(VertexId(n.saturating_sub(1) as u32));
    let mut tf = MatchingForest::build(forest, Matching::unweighted());
    let levels = tf.level_count();

    let mut cut = (0usize, 0u64, 0usize);
    let mut link = (0usize, 0u64, 0usize);
    let wants_updates = cfg.ops.iter().any(|&o| o != BenchOp::Card);
    if wants_updates && !edges.is_empty() {
        // Cut a random edge and put it straight back, so every update
        // sees the whole n-vertex tree. Updates take microseconds, so one
        // clock pair per op costs little.
        for _ in 0..cfg.updates {
            let (u, v) = edges[rng.gen_range(0..edges.len())];
            let (u, v) = (VertexId(u), VertexId(v));
            let start = Instant::now();
            tf.cut(u, v).expect("present edge");
            cut.1 += start.elapsed().as_nanos() as u64;
            cut.2 += tf.last_update().touched();
            let start = Instant::now();
            tf.link(u, v, 1).expect("removed tree edge");
            link.1 += start.elapsed().as_nanos() as u64;
            link.2 += tf.last_update().touched();
        }
        cut.0 = cfg.updates;
        link.0 = cfg.updates;
    }

    let mut rows = Vec::new();
    for &op in &cfg.ops {
        rows.push(match op {
            BenchOp::Cut => record(kind, n, op, cut.0, cut.1, cut.2, levels),
            BenchOp::Link => record(kind, n, op, link.0, link.1, link.2, levels),
            BenchOp::Card => {
                let vs: Vec<VertexId> = (0..cfg.queries).map(|_| VertexId(rng.gen_range(0..n.max(1) as u32))).collect();
                let mut best = u64::MAX;
                for _ in 0..cfg.query_repeats.max(1) {
                    let start = Instant::now();
                    let mut acc = 0u64;
                    for &v in &vs {
                        acc = acc.wrapping_add(black_box(tf.matching_cardinality(v)).get().unwrap_or(0));
                    }
                    black_box(acc);
                    best = best.min(start.elapsed().as_nanos() as u64);
                }
                record(kind, n, op, vs.len(), best, 0, levels)
            }
        });
    }
    rows
}

/// Writes the fixed header, then one line per record.
pub fn write_csv<W: Write>(records: &[BenchRecord], out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv(records: &[BenchRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(records, &mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("csv is utf-8")
}
