//! Slow, independent reference answers for tests.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::annot::{Color, MatchTable, MatchValue, State};
use crate::forest::VertexId;
use crate::query::{EdgeStatus, Tristate};

/// Enumeration covers every subset, so it stops here.
pub const EXHAUSTIVE_LIMIT: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TreeEdge {
    pub u: VertexId,
    pub v: VertexId,
    pub weight: u64,
}

impl TreeEdge {
    pub fn new(u: u32, v: u32, weight: u64) -> Self {
        TreeEdge { u: VertexId(u), v: VertexId(v), weight }
    }

    pub fn unit(u: u32, v: u32) -> Self {
        TreeEdge::new(u, v, 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("TooLarge")]
    TooLarge,
}

fn vertex_bound(edges: &[TreeEdge]) -> usize {
    edges.iter().map(|e| e.u.index().max(e.v.index()) + 1).max().unwrap_or(0)
}

/// Matches the edge at the smallest-id leaf, deletes both endpoints, and
/// repeats.
pub fn greedy_leaf_matching(edges: &[TreeEdge]) -> u64 {
    let n = vertex_bound(edges);
    let mut adj: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); n];
    for e in edges {
        adj[e.u.index()].insert(e.v.0);
        adj[e.v.index()].insert(e.u.0);
    }
    let mut leaves: BTreeSet<u32> = (0..n as u32).filter(|&v| adj[v as usize].len() == 1).collect();
    let mut count = 0;
    while let Some(leaf) = leaves.pop_first() {
        let Some(&p) = adj[leaf as usize].iter().next() else { continue };
        count += 1;
        for x in [leaf, p] {
            let around: Vec<u32> = std::mem::take(&mut adj[x as usize]).into_iter().collect();
            leaves.remove(&x);
            for y in around {
                let ys = &mut adj[y as usize];
                ys.remove(&x);
                match ys.len() {
                    1 => {
                        leaves.insert(y);
                    }
                    0 => {
                        leaves.remove(&y);
                    }
                    _ => {}
                }
            }
        }
    }
    count
}

/// Maximum-weight matching by the rooted two-state tree DP.
pub fn weighted_dp_matching(edges: &[TreeEdge]) -> u64 {
    let n = vertex_bound(edges);
    let mut adj: Vec<Vec<(u32, u64)>> = vec![Vec::new(); n];
    for e in edges {
        adj[e.u.index()].push((e.v.0, e.weight));
        adj[e.v.index()].push((e.u.0, e.weight));
    }
    // free[v]: best with v unmatched inside its subtree.
    // gain[v]: most that matching v to one child adds on top of free[v].
    let mut free = vec![0u64; n];
    let mut gain = vec![0u64; n];
    let mut seen = vec![false; n];
    let mut total = 0;
    for start in 0..n {
        if seen[start] || adj[start].is_empty() {
            continue;
        }
        seen[start] = true;
        let mut order = vec![(start, usize::MAX, 0u64)];
        let mut i = 0;
        while i < order.len() {
            let v = order[i].0;
            for &(c, w) in &adj[v] {
                if !seen[c as usize] {
                    seen[c as usize] = true;
                    order.push((c as usize, v, w));
                }
            }
            i += 1;
        }
        for &(v, parent, w) in order.iter().rev() {
            let best = free[v] + gain[v];
            if parent != usize::MAX {
                free[parent] += best;
                let with_edge = w + free[v];
                gain[parent] = gain[parent].max(with_edge.saturating_sub(best));
            } else {
                total += best;
            }
        }
    }
    total
}

/// Calls `visit(mask, value)` for every subset of `edges` that is a
/// matching.
fn for_each_matching(edges: &[TreeEdge], weighted: bool, mut visit: impl FnMut(u32, u64)) -> Result<(), OracleError> {
    if edges.len() > EXHAUSTIVE_LIMIT {
        return Err(OracleError::TooLarge);
    }
    let n = vertex_bound(edges);
    let mut used = vec![false; n];
    'subsets: for mask in 0u32..(1u32 << edges.len()) {
        used.iter_mut().for_each(|u| *u = false);
        let mut value = 0;
        for (i, e) in edges.iter().enumerate() {
            if mask & (1 << i) != 0 {
                if used[e.u.index()] || used[e.v.index()] {
                    continue 'subsets;
                }
                used[e.u.index()] = true;
                used[e.v.index()] = true;
                value += if weighted { e.weight } else { 1 };
            }
        }
        visit(mask, value);
    }
    Ok(())
}

fn covers(edges: &[TreeEdge], mask: u32, v: VertexId) -> bool {
    edges.iter().enumerate().any(|(i, e)| mask & (1 << i) != 0 && (e.u == v || e.v == v))
}

/// The four constrained optima of `edges` with boundary pair `(a, b)`.
pub fn exhaustive_tables(edges: &[TreeEdge], a: VertexId, b: VertexId, weighted: bool) -> Result<MatchTable, OracleError> {
    let mut table = MatchTable::NULL;
    for_each_matching(edges, weighted, |mask, value| {
        let s = State::new(color(covers(edges, mask, a)), color(covers(edges, mask, b)));
        table[s] = table[s].max(MatchValue::new(value));
    })?;
    Ok(table)
}

fn color(black: bool) -> Color {
    if black {
        Color::Black
    } else {
        Color::White
    }
}

pub fn exhaustive_max(edges: &[TreeEdge], weighted: bool) -> Result<u64, OracleError> {
    let mut best = 0;
    for_each_matching(edges, weighted, |_, value| best = best.max(value))?;
    Ok(best)
}

/// Among the best matchings that obey `constraints` (edge index, status),
/// is edge `e` ever matched?
pub fn exhaustive_edge_in_max(
    edges: &[TreeEdge],
    e: usize,
    constraints: &[(usize, EdgeStatus)],
    weighted: bool,
) -> Result<Tristate, OracleError> {
    let mut best: Option<u64> = None;
    let mut with_e: Option<u64> = None;
    for_each_matching(edges, weighted, |mask, value| {
        let ok = constraints.iter().all(|&(i, s)| (mask & (1 << i) != 0) == (s == EdgeStatus::Matched));
        if !ok {
            return;
        }
        best = best.max(Some(value));
        if mask & (1 << e) != 0 {
            with_e = with_e.max(Some(value));
        }
    })?;
    Ok(match best {
        None => Tristate::Infeasible,
        Some(b) if with_e == Some(b) => Tristate::Matched,
        Some(_) => Tristate::Unmatched,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<TreeEdge> {
        [(0, 2), (1, 2), (2, 3), (3, 4)].map(|(a, b)| TreeEdge::unit(a, b)).to_vec()
    }

    fn path(n: u32) -> Vec<TreeEdge> {
        (0..n).map(|i| TreeEdge::unit(i, i + 1)).collect()
    }

    #[test]
    fn greedy_examples() {
        assert_eq!(greedy_leaf_matching(&sample()), 2);
        assert_eq!(greedy_leaf_matching(&path(3)), 2);
        let star: Vec<_> = (1..=7).map(|i| TreeEdge::unit(0, i)).collect();
        assert_eq!(greedy_leaf_matching(&star), 1);
        assert_eq!(greedy_leaf_matching(&[]), 0);
    }

    #[test]
    fn table_examples() {
        let v = VertexId;
        assert_eq!(exhaustive_tables(&path(1), v(0), v(1), false).unwrap().to_string(), "(0,$,$,1)");
        assert_eq!(exhaustive_tables(&path(2), v(0), v(2), false).unwrap().to_string(), "(0,1,1,$)");
        assert_eq!(exhaustive_tables(&path(3), v(0), v(3), false).unwrap().to_string(), "(1,1,1,2)");
        assert_eq!(exhaustive_tables(&path(17), v(0), v(1), false), Err(OracleError::TooLarge));
    }

    #[test]
    fn membership_examples() {
        let t = sample();
        assert_eq!(exhaustive_edge_in_max(&t, 3, &[], false), Ok(Tristate::Matched));
        assert_eq!(exhaustive_edge_in_max(&t, 2, &[], false), Ok(Tristate::Unmatched));
        let both = [(0, EdgeStatus::Matched), (1, EdgeStatus::Matched)];
        assert_eq!(exhaustive_edge_in_max(&t, 3, &both, false), Ok(Tristate::Infeasible));
    }

    #[test]
    fn weighted_examples() {
        assert_eq!(weighted_dp_matching(&[TreeEdge::new(0, 1, 5)]), 5);
        let p = [TreeEdge::new(0, 1, 1), TreeEdge::new(1, 2, 10), TreeEdge::new(2, 3, 1)];
        assert_eq!(weighted_dp_matching(&p), 10);
        assert_eq!(exhaustive_max(&p, true), Ok(10));
    }

    #[test]
    fn unit_dp_equals_greedy_on_small_shapes() {
        for t in [sample(), path(1), path(6), path(9)] {
            assert_eq!(weighted_dp_matching(&t), greedy_leaf_matching(&t));
            assert_eq!(exhaustive_max(&t, false).unwrap(), greedy_leaf_matching(&t));
        }
    }
}
