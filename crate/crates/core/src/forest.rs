//! Underlying forest storage: vertices, weighted edges and per-vertex
//! incidence rings.
//!
//! Edge ids are handed out in increasing order and never reused, so the
//! ring around a vertex is simply its incident edges sorted by id, i.e.
//! insertion order. Removing an edge splices it out without disturbing the
//! relative order of the others.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use rustc_hash::FxHashMap;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub u32);

impl VertexId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl EdgeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub id: EdgeId,
    pub endpoints: (VertexId, VertexId),
    pub weight: u64,
}

impl Edge {
    /// The endpoint of this edge that is not `v`, if `v` is an endpoint.
    pub fn other(&self, v: VertexId) -> Option<VertexId> {
        match self.endpoints {
            (a, b) if a == v => Some(b),
            (a, b) if b == v => Some(a),
            _ => None,
        }
    }

    pub fn touches(&self, v: VertexId) -> bool {
        self.endpoints.0 == v || self.endpoints.1 == v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum ForestError {
    #[error("SelfLoop")]
    SelfLoop,
    #[error("DuplicateEdge")]
    DuplicateEdge,
    #[error("WouldCreateCycle")]
    WouldCreateCycle,
    #[error("NoSuchEdge")]
    NoSuchEdge,
    #[error("NotIncident")]
    NotIncident,
}

impl ForestError {
    /// Stable short code used by the script protocol.
    pub fn code(&self) -> &'static str {
        match self {
            ForestError::SelfLoop => "SelfLoop",
            ForestError::DuplicateEdge => "DuplicateEdge",
            ForestError::WouldCreateCycle => "WouldCreateCycle",
            ForestError::NoSuchEdge => "NoSuchEdge",
            ForestError::NotIncident => "NotIncident",
        }
    }
}

fn pair_key(u: VertexId, v: VertexId) -> (u32, u32) {
    if u.0 <= v.0 {
        (u.0, v.0)
    } else {
        (v.0, u.0)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Forest {
    rings: Vec<BTreeSet<EdgeId>>,
    edges: Vec<Option<Edge>>,
    by_pair: FxHashMap<(u32, u32), EdgeId>,
    live: usize,
}

impl Forest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_vertices(n: usize) -> Self {
        let mut f = Self::new();
        f.rings.resize_with(n, BTreeSet::new);
        f
    }

    pub fn add_vertex(&mut self) -> VertexId {
        let v = VertexId(self.rings.len() as u32);
        self.rings.push(BTreeSet::new());
        v
    }

    /// Grows the vertex set so that `v` exists.
    pub fn ensure_vertex(&mut self, v: VertexId) {
        if v.index() >= self.rings.len() {
            self.rings.resize_with(v.index() + 1, BTreeSet::new);
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.rings.len()
    }

    pub fn edge_count(&self) -> usize {
        self.live
    }

    /// Number of edge ids handed out so far, live or retired.
    pub fn edge_id_bound(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> {
        (0..self.rings.len() as u32).map(VertexId)
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter().flatten()
    }

    pub fn edge(&self, e: EdgeId) -> Option<&Edge> {
        self.edges.get(e.index()).and_then(Option::as_ref)
    }

    pub fn find_edge(&self, u: VertexId, v: VertexId) -> Option<EdgeId> {
        self.by_pair.get(&pair_key(u, v)).copied()
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.rings.get(v.index()).map_or(0, BTreeSet::len)
    }

    /// Incident edges of `v` in ring order, starting from the oldest.
    pub fn incident(&self, v: VertexId) -> impl Iterator<Item = EdgeId> + '_ {
        self.rings.get(v.index()).into_iter().flatten().copied()
    }

    pub fn neighbors(&self, v: VertexId) -> impl Iterator<Item = VertexId> + '_ {
        self.incident(v).map(move |e| self.edge(e).and_then(|edge| edge.other(v)).expect("ring holds only live incident edges"))
    }

    pub fn ring_successor(&self, v: VertexId, e: EdgeId) -> Result<EdgeId, ForestError> {
        let ring = self.ring_containing(v, e)?;
        Ok(ring
            .range((std::ops::Bound::Excluded(e), std::ops::Bound::Unbounded))
            .next()
            .or_else(|| ring.iter().next())
            .copied()
            .expect("ring contains e"))
    }

    pub fn ring_predecessor(&self, v: VertexId, e: EdgeId) -> Result<EdgeId, ForestError> {
        let ring = self.ring_containing(v, e)?;
        Ok(ring.range(..e).next_back().or_else(|| ring.iter().next_back()).copied().expect("ring contains e"))
    }

    fn ring_containing(&self, v: VertexId, e: EdgeId) -> Result<&BTreeSet<EdgeId>, ForestError> {
        match self.rings.get(v.index()) {
            Some(ring) if ring.contains(&e) => Ok(ring),
            _ => Err(ForestError::NotIncident),
        }
    }

    /// Inserts an edge after checking that it keeps the graph a forest.
    ///
    /// The acyclicity check is a breadth-first search over `u`'s component;
    /// [`crate::TopForest::link`] answers the same question through its
    /// cluster roots instead.
    pub fn insert_edge(&mut self, u: VertexId, v: VertexId, weight: u64) -> Result<EdgeId, ForestError> {
        self.check_insertable(u, v)?;
        if self.connected(u, v) {
            return Err(ForestError::WouldCreateCycle);
        }
        Ok(self.insert_unchecked(u, v, weight))
    }

    /// Builds a forest from an edge list, rejecting the first edge that
    /// would close a cycle. Runs in near-linear time.
    pub fn from_edges(edges: impl IntoIterator<Item = (VertexId, VertexId, u64)>) -> Result<Forest, ForestError> {
        let mut f = Forest::new();
        let mut dsu: Vec<u32> = Vec::new();
        fn find(dsu: &mut [u32], mut x: u32) -> u32 {
            while dsu[x as usize] != x {
                let p = dsu[x as usize];
                dsu[x as usize] = dsu[p as usize];
                x = p;
            }
            x
        }
        for (u, v, w) in edges {
            f.check_insertable(u, v)?;
            let need = u.index().max(v.index()) + 1;
            while dsu.len() < need {
                dsu.push(dsu.len() as u32);
            }
            let (ru, rv) = (find(&mut dsu, u.0), find(&mut dsu, v.0));
            if ru == rv {
                return Err(ForestError::WouldCreateCycle);
            }
            dsu[ru as usize] = rv;
            f.insert_unchecked(u, v, w);
        }
        Ok(f)
    }

    pub(crate) fn check_insertable(&self, u: VertexId, v: VertexId) -> Result<(), ForestError> {
        if u == v {
            return Err(ForestError::SelfLoop);
        }
        if self.find_edge(u, v).is_some() {
            return Err(ForestError::DuplicateEdge);
        }
        Ok(())
    }

    /// Records the edge without the cycle check. Caller guarantees `u` and
    /// `v` are in different components and the pair is new.
    pub(crate) fn insert_unchecked(&mut self, u: VertexId, v: VertexId, weight: u64) -> EdgeId {
        self.ensure_vertex(u);
        self.ensure_vertex(v);
        let id = EdgeId(self.edges.len() as u32);
        self.edges.push(Some(Edge { id, endpoints: (u, v), weight }));
        self.by_pair.insert(pair_key(u, v), id);
        self.rings[u.index()].insert(id);
        self.rings[v.index()].insert(id);
        self.live += 1;
        id
    }

    pub fn remove_edge(&mut self, u: VertexId, v: VertexId) -> Result<EdgeId, ForestError> {
        let id = self.by_pair.remove(&pair_key(u, v)).ok_or(ForestError::NoSuchEdge)?;
        let edge = self.edges[id.index()].take().expect("indexed edge is live");
        let (a, b) = edge.endpoints;
        self.rings[a.index()].remove(&id);
        self.rings[b.index()].remove(&id);
        self.live -= 1;
        Ok(id)
    }

    pub fn connected(&self, u: VertexId, v: VertexId) -> bool {
        if u == v {
            return true;
        }
        if u.index() >= self.rings.len() || v.index() >= self.rings.len() {
            return false;
        }
        self.component_of(u).contains(&v)
    }

    /// Vertices of `v`'s component in BFS order.
    pub fn component_of(&self, v: VertexId) -> Vec<VertexId> {
        let mut order = vec![v];
        let mut queue = VecDeque::from([(v, v)]);
        // A tree has one path between two vertices, so skipping the BFS
        // parent is enough to avoid revisits.
        while let Some((x, from)) = queue.pop_front() {
            for y in self.neighbors(x) {
                if y != from {
                    order.push(y);
                    queue.push_back((y, x));
                }
            }
        }
        order
    }

    /// Live edges of `v`'s component.
    pub fn component_edges(&self, v: VertexId) -> Vec<Edge> {
        let mut out = Vec::new();
        for x in self.component_of(v) {
            for e in self.incident(x) {
                let edge = self.edge(e).expect("live");
                if edge.endpoints.0 == x {
                    out.push(*edge);
                }
            }
        }
        out
    }

    /// Component label per vertex; labels are the smallest vertex id of the
    /// component.
    pub fn component_labels(&self) -> Vec<u32> {
        let n = self.rings.len();
        let mut label = vec![u32::MAX; n];
        for s in 0..n {
            if label[s] != u32::MAX {
                continue;
            }
            label[s] = s as u32;
            let mut stack = vec![VertexId(s as u32)];
            while let Some(x) = stack.pop() {
                for y in self.neighbors(x) {
                    if label[y.index()] == u32::MAX {
                        label[y.index()] = s as u32;
                        stack.push(y);
                    }
                }
            }
        }
        label
    }

    pub fn component_count(&self) -> usize {
        let labels = self.component_labels();
        labels.iter().enumerate().filter(|&(i, &l)| l == i as u32).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(i: u32) -> VertexId {
        VertexId(i)
    }

    #[test]
    fn first_edge_gets_id_zero() {
        let mut f = Forest::new();
        let e = f.insert_edge(v(0), v(1), 1).unwrap();
        assert_eq!(e, EdgeId(0));
        assert_eq!(f.degree(v(0)), 1);
        assert_eq!(f.degree(v(1)), 1);
    }

    #[test]
    fn rejects_duplicates_loops_and_cycles() {
        let mut f = Forest::new();
        f.insert_edge(v(0), v(1), 1).unwrap();
        assert_eq!(f.insert_edge(v(0), v(1), 1), Err(ForestError::DuplicateEdge));
        assert_eq!(f.insert_edge(v(1), v(0), 1), Err(ForestError::DuplicateEdge));
        assert_eq!(f.insert_edge(v(2), v(2), 1), Err(ForestError::SelfLoop));
        f.insert_edge(v(1), v(2), 1).unwrap();
        assert_eq!(f.insert_edge(v(0), v(2), 1), Err(ForestError::WouldCreateCycle));
        assert_eq!(f.edge_count(), 2);
    }

    #[test]
    fn remove_edge_errors_and_splits() {
        let mut f = Forest::new();
        f.insert_edge(v(0), v(1), 1).unwrap();
        assert_eq!(f.remove_edge(v(0), v(2)), Err(ForestError::NoSuchEdge));
        f.insert_edge(v(1), v(2), 1).unwrap();
        f.remove_edge(v(0), v(1)).unwrap();
        assert!(!f.connected(v(0), v(1)));
        assert!(f.connected(v(1), v(2)));
        assert_eq!(f.degree(v(0)), 0);
        assert_eq!(f.component_count(), 2);
    }

    #[test]
    fn ring_follows_insertion_order() {
        let mut f = Forest::new();
        let c = v(0);
        let e0 = f.insert_edge(c, v(1), 1).unwrap();
        let e1 = f.insert_edge(c, v(2), 1).unwrap();
        let e2 = f.insert_edge(c, v(3), 1).unwrap();
        assert_eq!(f.ring_successor(c, e0), Ok(e1));
        assert_eq!(f.ring_successor(c, e2), Ok(e0));
        assert_eq!(f.ring_predecessor(c, e0), Ok(e2));
        assert_eq!(f.ring_successor(v(1), e0), Ok(e0));
        assert_eq!(f.ring_successor(v(1), e1), Err(ForestError::NotIncident));
        f.remove_edge(c, v(2)).unwrap();
        assert_eq!(f.ring_successor(c, e0), Ok(e2));
    }

    #[test]
    fn ring_lengths_sum_to_twice_edges() {
        let mut f = Forest::new();
        for i in 1..10 {
            f.insert_edge(v(i / 2), v(i), 1).unwrap();
        }
        f.remove_edge(v(2), v(4)).unwrap();
        let total: usize = f.vertices().map(|x| f.degree(x)).sum();
        assert_eq!(total, 2 * f.edge_count());
        assert_eq!(f.component_count(), f.vertex_count() - f.edge_count());
        for x in f.vertices() {
            let deg = f.degree(x);
            if let Some(start) = f.incident(x).next() {
                let mut e = start;
                for _ in 0..deg {
                    let next = f.ring_successor(x, e).unwrap();
                    assert_eq!(f.ring_predecessor(x, next), Ok(e));
                    e = next;
                }
                assert_eq!(e, start);
            }
        }
    }
}
