//! Random link/cut churn with periodic audits against the oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use treematch::oracle::{greedy_leaf_matching, weighted_dp_matching, TreeEdge};
use treematch::{ForestError, Matching, MatchingForest, VertexId};

#[derive(Clone, Debug)]
pub struct FuzzConfig {
    /// Vertex universe `0..n`.
    pub n: u32,
    pub ops: usize,
    pub seed: u64,
    pub weighted: bool,
    /// Compare one random vertex's value with the oracle every k ops.
    pub audit_every: usize,
    /// Full structural audit every k ops.
    pub validate_every: usize,
    /// Compare against a from-scratch build every k ops.
    pub rebuild_every: usize,
    pub cut_probability: f64,
    pub max_weight: u64,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig {
            n: 512,
            ops: 10_000,
            seed: 0,
            weighted: false,
            audit_every: 16,
            validate_every: 0,
            rebuild_every: 0,
            cut_probability: 0.4,
            max_weight: 100,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FuzzReport {
    pub links: usize,
    pub cuts: usize,
    pub value_checks: usize,
    pub validations: usize,
    pub rebuilds: usize,
    pub failures: Vec<String>,
}

impl FuzzReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

fn oracle_value(tf: &MatchingForest, v: VertexId) -> u64 {
    let tree: Vec<TreeEdge> =
        tf.forest().component_edges(v).iter().map(|e| TreeEdge { u: e.endpoints.0, v: e.endpoints.1, weight: e.weight }).collect();
    if tf.annotation().weighted {
        weighted_dp_matching(&tree)
    } else {
        greedy_leaf_matching(&tree)
    }
}

/// Every op is a successful link or cut. Failures stop being collected
/// after the first 20.
pub fn run_fuzz(cfg: &FuzzConfig) -> FuzzReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ann = if cfg.weighted { Matching::weighted() } else { Matching::unweighted() };
    let mut tf = MatchingForest::new(ann);
    for v in 0..cfg.n {
        tf.ensure_vertex(VertexId(v));
    }
    let mut edges: Vec<(VertexId, VertexId)> = Vec::new();
    let mut report = FuzzReport::default();
    let every = |k: usize, step: usize| k > 0 && step.is_multiple_of(k);
    for step in 1..=cfg.ops {
        let linked = !rng.gen_bool(cfg.cut_probability) || edges.is_empty();
        let mut done = false;
        if linked {
            for _ in 0..64 {
                let a = VertexId(rng.gen_range(0..cfg.n));
                let b = VertexId(rng.gen_range(0..cfg.n));
                let w = if cfg.weighted { rng.gen_range(0..=cfg.max_weight) } else { 1 };
                match tf.link(a, b, w) {
                    Ok(_) => {
                        edges.push((a, b));
                        report.links += 1;
                        done = true;
                        break;
                    }
                    Err(ForestError::SelfLoop | ForestError::DuplicateEdge | ForestError::WouldCreateCycle) => {}
                    Err(e) => {
                        report.failures.push(format!("op {step}: link {a} {b}: {e}"));
                        return report;
                    }
                }
            }
        }
        if !done && !edges.is_empty() {
            let i = rng.gen_range(0..edges.len());
            let (a, b) = edges.swap_remove(i);
            if let Err(e) = tf.cut(a, b) {
                report.failures.push(format!("op {step}: cut {a} {b}: {e}"));
                return report;
            }
            report.cuts += 1;
        }

        if every(cfg.audit_every, step) {
            let v = VertexId(rng.gen_range(0..cfg.n));
            let got = tf.matching_cardinality(v).get();
            let want = oracle_value(&tf, v);
            report.value_checks += 1;
            if got != Some(want) {
                fail(&mut report, format!("op {step}: vertex {v} value {got:?}, oracle {want}"));
            }
        }
        if every(cfg.validate_every, step) {
            report.validations += 1;
            if let Err(v) = tf.audit() {
                fail(&mut report, format!("op {step}: {v}"));
            }
        }
        if every(cfg.rebuild_every, step) {
            report.rebuilds += 1;
            if let Some(diff) = rebuild_difference(&tf) {
                fail(&mut report, format!("op {step}: rebuild differs: {diff}"));
            }
        }
    }
    report
}

fn fail(report: &mut FuzzReport, msg: String) {
    if report.failures.len() < 20 {
        report.failures.push(msg);
    }
}

/// First answer on which a fresh build disagrees with `tf`.
pub fn rebuild_difference(tf: &MatchingForest) -> Option<String> {
    let fresh = MatchingForest::build(tf.forest().clone(), *tf.annotation());
    for v in tf.forest().vertices() {
        let (a, b) = (tf.matching_cardinality(v), fresh.matching_cardinality(v));
        if a != b {
            return Some(format!("card {v}: {a} vs {b}"));
        }
    }
    for e in tf.forest().edges() {
        let (a, b) = (tf.edge_in_some_maximum(e.id), fresh.edge_in_some_maximum(e.id));
        if a != b {
            return Some(format!("matched {}: {a:?} vs {b:?}", e.id));
        }
    }
    if tf.total_cardinality() != fresh.total_cardinality() {
        return Some("total".to_string());
    }
    None
}
