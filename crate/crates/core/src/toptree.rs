//! Level-structured top tree over a dynamic forest.
//!
//! Level 0 holds one base cluster per edge. Level `l + 1` is obtained from
//! level `l` by a maximal set of non-conflicting rake and compress moves;
//! clusters left out of every move are lifted unchanged. A component whose
//! level holds a single cluster stops there, and that cluster is the
//! component's root.
//!
//! Each level is viewed as a forest whose edges are the clusters (joining
//! their two boundary vertices). Around a vertex the clusters of a level are
//! ordered by their *key* at that vertex: the smallest edge id of the
//! cluster that touches the vertex. That is the order the incidence rings
//! would give if each cluster were shrunk back to its oldest edge there.
//!
//! Moves, at level `l`:
//! - compress `X=(A,B)` with `Y=(B,C)` when `B` has exactly these two
//!   clusters; the result is `(A,C)`.
//! - rake a leaf `X=(A,B)` (nothing else at `A`) onto its ring successor
//!   `Y` at `B`; the result keeps `Y`'s boundary.
//!
//! Updates destroy the clusters whose formation became illegal, free their
//! children, and redo the greedy scan only around the change, one level at
//! a time.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::forest::{Edge, EdgeId, Forest, ForestError, VertexId};

/// Per-cluster data computed bottom-up through rakes and compresses.
///
/// Tables are kept in the cluster's stored boundary order; the engine
/// re-orients inputs before calling `rake`/`compress`.
pub trait Annotation {
    type Table: Clone + PartialEq + fmt::Debug + fmt::Display;

    fn base(&self, edge: &Edge) -> Self::Table;

    /// `leaf` is oriented (dangling, shared), `onto` (shared, far); the
    /// result is oriented (shared, far).
    fn rake(&self, leaf: &Self::Table, onto: &Self::Table) -> Self::Table;

    /// `left` is (A, B), `right` is (B, C); the result is (A, C).
    fn compress(&self, left: &Self::Table, right: &Self::Table) -> Self::Table;

    /// The same table read with the boundary order reversed.
    fn reverse(&self, table: &Self::Table) -> Self::Table;

    /// Contribution of a component root to the forest-wide total.
    fn value(&self, table: &Self::Table) -> u64;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClusterId(pub u64);

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClusterKind {
    Base(EdgeId),
    Rake { leaf: ClusterId, onto: ClusterId },
    Compress { left: ClusterId, right: ClusterId },
    Lift(ClusterId),
}

impl fmt::Display for ClusterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClusterKind::Base(e) => write!(f, "base({e})"),
            ClusterKind::Rake { leaf, onto } => write!(f, "rake({leaf}>{onto})"),
            ClusterKind::Compress { left, right } => write!(f, "compress({left},{right})"),
            ClusterKind::Lift(c) => write!(f, "lift({c})"),
        }
    }
}

/// Read-only snapshot of one cluster.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterView<T> {
    pub id: ClusterId,
    pub level: usize,
    pub boundary: (VertexId, VertexId),
    pub kind: ClusterKind,
    pub parent: Option<ClusterId>,
    pub edge_count: usize,
    pub table: T,
}

/// Work done by the most recent link or cut.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UpdateStats {
    pub created: usize,
    pub destroyed: usize,
}

impl UpdateStats {
    /// Clusters destroyed or created.
    pub fn touched(&self) -> usize {
        self.created + self.destroyed
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{invariant}: {detail}")]
pub struct InvariantViolation {
    pub invariant: &'static str,
    pub detail: String,
}

fn violation(invariant: &'static str, detail: impl Into<String>) -> InvariantViolation {
    InvariantViolation { invariant, detail: detail.into() }
}

/// Level budget for a component with `edges` edges: `4·log2(n) + 4`.
pub fn level_budget(edges: usize) -> usize {
    if edges <= 1 {
        return 4;
    }
    (4.0 * (edges as f64).log2()).floor() as usize + 4
}

/// Levels per jump pointer block.
const SKIP: u32 = 8;

pub(crate) type Slot = u32;
const NONE: Slot = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Formation {
    Base(EdgeId),
    Rake { leaf: Slot, onto: Slot },
    Compress { left: Slot, right: Slot },
    Lift(Slot),
}

#[derive(Clone, Debug)]
pub(crate) struct Node<T> {
    pub(crate) id: ClusterId,
    pub(crate) level: u32,
    pub(crate) boundary: [VertexId; 2],
    keys: [u32; 2],
    pub(crate) formation: Formation,
    pub(crate) table: T,
    edges: u32,
    is_root: bool,
}

impl<T> Node<T> {
    fn side_of(&self, v: VertexId) -> Option<usize> {
        if self.boundary[0] == v {
            Some(0)
        } else if self.boundary[1] == v {
            Some(1)
        } else {
            None
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum JoinKind {
    Rake,
    Compress,
}

/// How a combine parent reads its two children. `left` is the raked leaf
/// or the compress child holding the parent's first boundary vertex.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Join {
    pub(crate) kind: JoinKind,
    pub(crate) left: Slot,
    pub(crate) right: Slot,
    pub(crate) left_reversed: bool,
    pub(crate) right_reversed: bool,
    pub(crate) result_reversed: bool,
}

type Ring = BTreeMap<u32, Slot>;

#[derive(Clone, Debug, Default)]
struct Pending {
    /// Parents of destroyed clusters of this level, to be destroyed too.
    orphans: Vec<(Slot, ClusterId)>,
    /// Ring positions (vertex, key) that changed at this level.
    changed: Vec<(VertexId, u32)>,
    /// Clusters created at this level and not yet given a parent.
    added: Vec<Slot>,
    /// Clusters of this level whose parent was destroyed.
    freed: Vec<Slot>,
}

impl Pending {
    fn is_empty(&self) -> bool {
        self.orphans.is_empty() && self.changed.is_empty() && self.added.is_empty() && self.freed.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct TopForest<A: Annotation> {
    forest: Forest,
    annotation: A,
    nodes: Vec<Option<Node<A::Table>>>,
    /// `[parent, jump]` per slot. The jump pointer is the ancestor at the
    /// next level divisible by `SKIP`, if the chain gets that far, so root
    /// walks take a few steps per block of levels.
    up: Vec<[Slot; 2]>,
    /// Base cluster of each vertex's oldest incident edge, with that
    /// cluster's jump pointer.
    vertex_base: Vec<[Slot; 2]>,
    free_slots: Vec<Slot>,
    next_id: u64,
    base_of: Vec<Slot>,
    /// `rings[v][level]`: the clusters of that level with boundary `v`.
    rings: Vec<Vec<Ring>>,
    level_sizes: Vec<usize>,
    index: FxHashMap<ClusterId, Slot>,
    total: u64,
    stats: UpdateStats,
    pending: Vec<Pending>,
    /// Reused candidate buffers for repair.
    cand_buf: Vec<Slot>,
    order_buf: Vec<(ClusterId, Slot)>,
}

impl<A: Annotation> TopForest<A> {
    pub fn new(annotation: A) -> Self {
        TopForest {
            forest: Forest::new(),
            annotation,
            nodes: Vec::new(),
            up: Vec::new(),
            vertex_base: Vec::new(),
            free_slots: Vec::new(),
            next_id: 0,
            base_of: Vec::new(),
            rings: Vec::new(),
            level_sizes: Vec::new(),
            index: FxHashMap::default(),
            total: 0,
            stats: UpdateStats::default(),
            pending: Vec::new(),
            cand_buf: Vec::new(),
            order_buf: Vec::new(),
        }
    }

    /// Builds the full structure for an existing forest.
    pub fn build(forest: Forest, annotation: A) -> Self {
        let mut tf = TopForest::new(annotation);
        let edges: Vec<Edge> = forest.edges().copied().collect();
        tf.base_of = vec![NONE; forest.edge_id_bound()];
        tf.forest = forest;
        for edge in &edges {
            tf.create_base(edge);
        }
        for v in tf.forest.vertices().collect::<Vec<_>>() {
            tf.refresh_vertex(v);
        }
        tf.repair();
        tf
    }

    pub fn annotation(&self) -> &A {
        &self.annotation
    }

    pub fn forest(&self) -> &Forest {
        &self.forest
    }

    pub fn ensure_vertex(&mut self, v: VertexId) {
        self.forest.ensure_vertex(v);
    }

    pub fn last_update(&self) -> UpdateStats {
        self.stats
    }

    /// Sum of root values over all components.
    pub fn total_value(&self) -> u64 {
        self.total
    }

    /// Number of non-empty levels.
    pub fn level_count(&self) -> usize {
        self.level_sizes.iter().rposition(|&n| n > 0).map_or(0, |i| i + 1)
    }

    pub fn cluster_count(&self) -> usize {
        self.index.len()
    }

    /// Adds the edge `(u, v)` and repairs every level.
    pub fn link(&mut self, u: VertexId, v: VertexId, weight: u64) -> Result<EdgeId, ForestError> {
        self.forest.check_insertable(u, v)?;
        if let (Some(ru), Some(rv)) = (self.root_slot(u), self.root_slot(v)) {
            if ru == rv {
                return Err(ForestError::WouldCreateCycle);
            }
        }
        self.stats = UpdateStats::default();
        let id = self.forest.insert_unchecked(u, v, weight);
        if self.base_of.len() <= id.index() {
            self.base_of.resize(id.index() + 1, NONE);
        }
        let edge = *self.forest.edge(id).expect("just inserted");
        self.create_base(&edge);
        self.refresh_vertex(u);
        self.refresh_vertex(v);
        self.repair();
        Ok(id)
    }

    /// Removes the edge `(u, v)` and repairs every level.
    pub fn cut(&mut self, u: VertexId, v: VertexId) -> Result<EdgeId, ForestError> {
        let id = self.forest.remove_edge(u, v)?;
        self.stats = UpdateStats::default();
        let slot = std::mem::replace(&mut self.base_of[id.index()], NONE);
        self.destroy(slot);
        self.refresh_vertex(u);
        self.refresh_vertex(v);
        self.repair();
        Ok(id)
    }

    pub fn root_of(&self, v: VertexId) -> Option<ClusterId> {
        self.root_slot(v).map(|s| self.node(s).id)
    }

    #[inline]
    pub(crate) fn root_slot(&self, v: VertexId) -> Option<Slot> {
        match self.vertex_base.get(v.index()) {
            Some(&[b, j]) if b != NONE => Some(self.climb(if j != NONE { j } else { b })),
            _ => None,
        }
    }

    fn refresh_vertex(&mut self, v: VertexId) {
        if self.vertex_base.len() <= v.index() {
            self.vertex_base.resize(v.index() + 1, [NONE; 2]);
        }
        let b = self.forest.incident(v).next().map_or(NONE, |e| self.base_of[e.index()]);
        let j = if b == NONE { NONE } else { self.up[b as usize][1] };
        self.vertex_base[v.index()] = [b, j];
    }

    /// Copies a base cluster's new jump pointer to the vertices that use it.
    fn sync_vertex_jump(&mut self, d: Slot) {
        let n = self.nodes[d as usize].as_ref().expect("live cluster");
        if n.level != 0 {
            return;
        }
        let j = self.up[d as usize][1];
        for w in n.boundary {
            if let Some(entry) = self.vertex_base.get_mut(w.index()) {
                if entry[0] == d {
                    entry[1] = j;
                }
            }
        }
    }

    pub(crate) fn edge_root_slot(&self, e: EdgeId) -> Option<Slot> {
        let base = *self.base_of.get(e.index())?;
        (base != NONE).then(|| self.climb(base))
    }

    #[inline]
    fn climb(&self, mut s: Slot) -> Slot {
        loop {
            let [p, j] = self.up[s as usize];
            if j != NONE {
                s = j;
            } else if p != NONE {
                s = p;
            } else {
                return s;
            }
        }
    }

    /// Base cluster of `e`, then each ancestor up to the root.
    pub fn ancestor_path(&self, e: EdgeId) -> Result<Vec<ClusterId>, ForestError> {
        Ok(self.ancestor_slots(e)?.into_iter().map(|s| self.node(s).id).collect())
    }

    pub(crate) fn ancestor_slots(&self, e: EdgeId) -> Result<Vec<Slot>, ForestError> {
        let base = self.base_slot(e)?;
        let mut path = vec![base];
        let mut s = base;
        while self.up[s as usize][0] != NONE {
            s = self.up[s as usize][0];
            path.push(s);
        }
        Ok(path)
    }

    pub(crate) fn base_slot(&self, e: EdgeId) -> Result<Slot, ForestError> {
        match self.base_of.get(e.index()) {
            Some(&s) if s != NONE => Ok(s),
            _ => Err(ForestError::NoSuchEdge),
        }
    }

    pub fn cluster(&self, id: ClusterId) -> Option<ClusterView<A::Table>> {
        self.index.get(&id).map(|&s| self.view(s))
    }

    /// All clusters, ordered by level then id.
    pub fn clusters(&self) -> Vec<ClusterView<A::Table>> {
        let mut out: Vec<_> = self.live_slots().map(|s| self.view(s)).collect();
        out.sort_by_key(|c| (c.level, c.id));
        out
    }

    pub fn level_clusters(&self, level: usize) -> Vec<ClusterView<A::Table>> {
        self.clusters().into_iter().filter(|c| c.level == level).collect()
    }

    /// Edges contained in a cluster, ascending.
    pub fn cluster_edges(&self, id: ClusterId) -> Option<Vec<EdgeId>> {
        let slot = *self.index.get(&id)?;
        let mut out = Vec::new();
        let mut stack = vec![slot];
        while let Some(s) = stack.pop() {
            match self.node(s).formation {
                Formation::Base(e) => out.push(e),
                Formation::Lift(c) => stack.push(c),
                Formation::Rake { leaf: a, onto: b } | Formation::Compress { left: a, right: b } => {
                    stack.push(a);
                    stack.push(b);
                }
            }
        }
        out.sort();
        Some(out)
    }

    /// One line per cluster: id, level, kind, boundary, table.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for c in self.clusters() {
            out.push_str(&format!("{} L{} {} ({},{}) {}\n", c.id, c.level, c.kind, c.boundary.0, c.boundary.1, c.table));
        }
        out
    }

    fn live_slots(&self) -> impl Iterator<Item = Slot> + '_ {
        self.nodes.iter().enumerate().filter(|(_, n)| n.is_some()).map(|(i, _)| i as Slot)
    }

    fn view(&self, s: Slot) -> ClusterView<A::Table> {
        let n = self.node(s);
        let id = |x: Slot| self.node(x).id;
        let kind = match n.formation {
            Formation::Base(e) => ClusterKind::Base(e),
            Formation::Rake { leaf, onto } => ClusterKind::Rake { leaf: id(leaf), onto: id(onto) },
            Formation::Compress { left, right } => ClusterKind::Compress { left: id(left), right: id(right) },
            Formation::Lift(c) => ClusterKind::Lift(id(c)),
        };
        let p = self.up[s as usize][0];
        ClusterView {
            id: n.id,
            level: n.level as usize,
            boundary: (n.boundary[0], n.boundary[1]),
            kind,
            parent: (p != NONE).then(|| id(p)),
            edge_count: n.edges as usize,
            table: n.table.clone(),
        }
    }

    #[inline]
    pub(crate) fn node(&self, s: Slot) -> &Node<A::Table> {
        self.nodes[s as usize].as_ref().expect("live cluster slot")
    }

    pub(crate) fn parent_slot(&self, s: Slot) -> Option<Slot> {
        let p = self.up[s as usize][0];
        (p != NONE).then_some(p)
    }

    fn alive(&self, s: Slot) -> bool {
        self.nodes.get(s as usize).is_some_and(Option::is_some)
    }

    // ---------------------------------------------------------------
    // Rings

    fn ring(&self, level: u32, v: VertexId) -> Option<&Ring> {
        self.rings.get(v.index())?.get(level as usize).filter(|r| !r.is_empty())
    }

    fn degree(&self, level: u32, v: VertexId) -> usize {
        self.ring(level, v).map_or(0, BTreeMap::len)
    }

    fn ring_succ(ring: &Ring, key: u32) -> Slot {
        *ring.range(key.saturating_add(1)..).next().or_else(|| ring.iter().next()).map(|(_, s)| s).expect("non-empty ring")
    }

    fn ring_pred(ring: &Ring, key: u32) -> Slot {
        *ring.range(..key).next_back().or_else(|| ring.iter().next_back()).map(|(_, s)| s).expect("non-empty ring")
    }

    fn is_isolated(&self, s: Slot) -> bool {
        let n = self.node(s);
        self.degree(n.level, n.boundary[0]) == 1 && self.degree(n.level, n.boundary[1]) == 1
    }

    fn ring_insert(&mut self, level: u32, v: VertexId, key: u32, s: Slot) {
        let l = level as usize;
        if self.rings.len() <= v.index() {
            self.rings.resize_with(v.index() + 1, Vec::new);
        }
        let levels = &mut self.rings[v.index()];
        if levels.len() <= l {
            levels.resize_with(l + 1, Ring::new);
        }
        let prev = levels[l].insert(key, s);
        debug_assert!(prev.is_none(), "ring key collision at level {l} vertex {v}");
        self.pending_mut(l).changed.push((v, key));
    }

    fn ring_remove(&mut self, level: u32, v: VertexId, key: u32) {
        let l = level as usize;
        let levels = &mut self.rings[v.index()];
        levels[l].remove(&key);
        while levels.last().is_some_and(BTreeMap::is_empty) {
            levels.pop();
        }
        self.pending_mut(l).changed.push((v, key));
    }

    fn pending_mut(&mut self, level: usize) -> &mut Pending {
        if self.pending.len() <= level {
            self.pending.resize_with(level + 1, Pending::default);
        }
        &mut self.pending[level]
    }

    // ---------------------------------------------------------------
    // Cluster lifecycle

    fn alloc(&mut self, node: Node<A::Table>) -> Slot {
        let id = node.id;
        let slot = match self.free_slots.pop() {
            Some(s) => {
                self.nodes[s as usize] = Some(node);
                self.up[s as usize] = [NONE; 2];
                s
            }
            None => {
                self.nodes.push(Some(node));
                self.up.push([NONE; 2]);
                (self.nodes.len() - 1) as Slot
            }
        };
        self.index.insert(id, slot);
        slot
    }

    fn next_cluster_id(&mut self) -> ClusterId {
        let id = ClusterId(self.next_id);
        self.next_id += 1;
        id
    }

    fn create(&mut self, level: u32, boundary: [VertexId; 2], keys: [u32; 2], formation: Formation, table: A::Table, edges: u32) -> Slot {
        let id = self.next_cluster_id();
        let slot = self.alloc(Node { id, level, boundary, keys, formation, table, edges, is_root: false });
        let l = level as usize;
        if self.level_sizes.len() <= l {
            self.level_sizes.resize(l + 1, 0);
        }
        self.level_sizes[l] += 1;
        self.ring_insert(level, boundary[0], keys[0], slot);
        self.ring_insert(level, boundary[1], keys[1], slot);
        self.pending_mut(l).added.push(slot);
        match formation {
            Formation::Base(_) => {}
            Formation::Lift(c) => self.set_parent(c, slot),
            Formation::Rake { leaf: a, onto: b } | Formation::Compress { left: a, right: b } => {
                self.set_parent(a, slot);
                self.set_parent(b, slot);
            }
        }
        self.stats.created += 1;
        slot
    }

    fn create_base(&mut self, edge: &Edge) {
        let (u, v) = edge.endpoints;
        let table = self.annotation.base(edge);
        let slot = self.create(0, [u, v], [edge.id.0, edge.id.0], Formation::Base(edge.id), table, 1);
        self.base_of[edge.id.index()] = slot;
    }

    fn set_parent(&mut self, child: Slot, parent: Slot) {
        self.link_parent(child, parent);
        self.clear_root(child);
    }

    /// Sets `parent[x]` and repairs the jump pointers that pass through it.
    fn link_parent(&mut self, x: Slot, p: Slot) {
        self.up[x as usize][0] = p;
        let level = self.node(x).level;
        let j = if p == NONE {
            NONE
        } else if (level + 1).is_multiple_of(SKIP) {
            p
        } else {
            self.up[p as usize][1]
        };
        self.up[x as usize][1] = j;
        self.sync_vertex_jump(x);
        // Descendants in the same block jump to the same place.
        let mut stack = [NONE; 2 * SKIP as usize];
        let mut top = 0;
        if !level.is_multiple_of(SKIP) {
            for c in self.children(x) {
                if c != NONE {
                    stack[top] = c;
                    top += 1;
                }
            }
        }
        while top > 0 {
            top -= 1;
            let d = stack[top];
            self.up[d as usize][1] = j;
            self.sync_vertex_jump(d);
            if !self.node(d).level.is_multiple_of(SKIP) {
                for c in self.children(d) {
                    if c != NONE {
                        stack[top] = c;
                        top += 1;
                    }
                }
            }
        }
    }

    fn children(&self, s: Slot) -> [Slot; 2] {
        match self.node(s).formation {
            Formation::Base(_) => [NONE, NONE],
            Formation::Lift(c) => [c, NONE],
            Formation::Rake { leaf: a, onto: b } | Formation::Compress { left: a, right: b } => [a, b],
        }
    }

    fn clear_root(&mut self, s: Slot) {
        let node = self.nodes[s as usize].as_mut().expect("live");
        if node.is_root {
            node.is_root = false;
            let v = self.annotation.value(&node.table);
            self.total -= v;
        }
    }

    fn mark_root(&mut self, s: Slot) {
        let node = self.nodes[s as usize].as_mut().expect("live");
        if !node.is_root {
            node.is_root = true;
            let v = self.annotation.value(&node.table);
            self.total += v;
        }
    }

    fn destroy(&mut self, s: Slot) {
        self.clear_root(s);
        let node = self.nodes[s as usize].take().expect("destroying a live cluster");
        let level = node.level;
        self.index.remove(&node.id);
        self.level_sizes[level as usize] -= 1;
        self.ring_remove(level, node.boundary[0], node.keys[0]);
        self.ring_remove(level, node.boundary[1], node.keys[1]);
        let p = std::mem::replace(&mut self.up[s as usize][0], NONE);
        self.up[s as usize][1] = NONE;
        if p != NONE {
            let pid = self.node(p).id;
            self.pending_mut(level as usize).orphans.push((p, pid));
        }
        let children: [Slot; 2] = match node.formation {
            Formation::Base(_) => [NONE, NONE],
            Formation::Lift(c) => [c, NONE],
            Formation::Rake { leaf: a, onto: b } | Formation::Compress { left: a, right: b } => [a, b],
        };
        for c in children {
            if c != NONE && self.alive(c) && self.up[c as usize][0] == s {
                self.link_parent(c, NONE);
                self.pending_mut(level as usize - 1).freed.push(c);
            }
        }
        self.free_slots.push(s);
        self.stats.destroyed += 1;
    }

    // ---------------------------------------------------------------
    // Moves

    /// The boundary vertex two clusters have in common, if exactly one.
    fn shared_vertex(&self, a: Slot, b: Slot) -> Option<VertexId> {
        let (na, nb) = (self.node(a), self.node(b));
        let mut found = None;
        for v in na.boundary {
            if nb.side_of(v).is_some() {
                if found.is_some() {
                    return None;
                }
                found = Some(v);
            }
        }
        found
    }

    pub(crate) fn join_of(&self, parent: Slot) -> Option<Join> {
        let (kind, left, right) = match self.node(parent).formation {
            Formation::Rake { leaf, onto } => (JoinKind::Rake, leaf, onto),
            Formation::Compress { left, right } => (JoinKind::Compress, left, right),
            _ => return None,
        };
        let shared = self.shared_vertex(left, right).expect("combined clusters share one vertex");
        let left_reversed = self.node(left).boundary[1] != shared;
        let right_reversed = self.node(right).boundary[0] != shared;
        let result_reversed = kind == JoinKind::Rake && right_reversed;
        Some(Join { kind, left, right, left_reversed, right_reversed, result_reversed })
    }

    /// Combines two child tables according to `join`, given in stored order.
    pub(crate) fn join_tables(&self, join: &Join, left: &A::Table, right: &A::Table) -> A::Table {
        let ann = &self.annotation;
        let l = if join.left_reversed { ann.reverse(left) } else { left.clone() };
        let r = if join.right_reversed { ann.reverse(right) } else { right.clone() };
        let out = match join.kind {
            JoinKind::Rake => ann.rake(&l, &r),
            JoinKind::Compress => ann.compress(&l, &r),
        };
        if join.result_reversed {
            ann.reverse(&out)
        } else {
            out
        }
    }

    fn unconsumed(&self, s: Slot) -> bool {
        let p = self.up[s as usize][0];
        p == NONE || matches!(self.node(p).formation, Formation::Lift(_))
    }

    fn release_lift(&mut self, s: Slot) {
        let p = self.up[s as usize][0];
        if p != NONE {
            debug_assert!(matches!(self.node(p).formation, Formation::Lift(_)));
            self.destroy(p);
        }
    }

    fn compress(&mut self, left: Slot, right: Slot, shared: VertexId) -> Slot {
        self.release_lift(left);
        self.release_lift(right);
        let (ln, rn) = (self.node(left), self.node(right));
        let ls = ln.side_of(shared).expect("shared on left");
        let rs = rn.side_of(shared).expect("shared on right");
        let boundary = [ln.boundary[1 - ls], rn.boundary[1 - rs]];
        let keys = [ln.keys[1 - ls], rn.keys[1 - rs]];
        let level = ln.level + 1;
        let edges = ln.edges + rn.edges;
        let join = Join { kind: JoinKind::Compress, left, right, left_reversed: ls != 1, right_reversed: rs != 0, result_reversed: false };
        let table = self.join_tables(&join, &ln.table, &rn.table);
        self.create(level, boundary, keys, Formation::Compress { left, right }, table, edges)
    }

    fn rake(&mut self, leaf: Slot, onto: Slot, shared: VertexId) -> Slot {
        self.release_lift(leaf);
        self.release_lift(onto);
        let (ln, on) = (self.node(leaf), self.node(onto));
        let ls = ln.side_of(shared).expect("shared on leaf");
        let os = on.side_of(shared).expect("shared on onto");
        let mut keys = on.keys;
        keys[os] = keys[os].min(ln.keys[ls]);
        let level = on.level + 1;
        let edges = ln.edges + on.edges;
        let join = Join {
            kind: JoinKind::Rake,
            left: leaf,
            right: onto,
            left_reversed: ls != 1,
            right_reversed: os != 0,
            result_reversed: os != 0,
        };
        let table = self.join_tables(&join, &ln.table, &on.table);
        let boundary = on.boundary;
        self.create(level, boundary, keys, Formation::Rake { leaf, onto }, table, edges)
    }

    /// Applies the first legal move of `x` with an unconsumed partner:
    /// compress at either boundary, else rake `x` onto its ring successor.
    fn try_move(&mut self, x: Slot) -> bool {
        let n = self.node(x);
        let level = n.level;
        let boundary = n.boundary;
        let keys = n.keys;
        for v in boundary {
            let ring = self.ring(level, v).expect("boundary ring");
            if ring.len() == 2 {
                let y = ring.values().copied().find(|&y| y != x).expect("two entries");
                if self.unconsumed(y) {
                    self.compress(x, y, v);
                    return true;
                }
            }
        }
        if let Some(attach) = self.leaf_attachment(x) {
            let v = boundary[attach];
            let ring = self.ring(level, v).expect("boundary ring");
            if ring.len() >= 2 {
                let y = Self::ring_succ(ring, keys[attach]);
                if self.unconsumed(y) {
                    self.rake(x, y, v);
                    return true;
                }
            }
        }
        false
    }

    /// Side of the attachment vertex when `x` is a leaf cluster at its level.
    fn leaf_attachment(&self, x: Slot) -> Option<usize> {
        let n = self.node(x);
        let d0 = self.degree(n.level, n.boundary[0]);
        let d1 = self.degree(n.level, n.boundary[1]);
        match (d0, d1) {
            (1, d) if d >= 2 => Some(1),
            (d, 1) if d >= 2 => Some(0),
            _ => None,
        }
    }

    /// Whether the formation of `child`'s parent is still legal.
    fn parent_valid(&self, child: Slot) -> bool {
        let p = self.up[child as usize][0];
        match self.node(p).formation {
            Formation::Base(_) => unreachable!("base clusters have no children"),
            Formation::Lift(_) => !self.is_isolated(child),
            Formation::Compress { left, right } => {
                let shared = self.shared_vertex(left, right).expect("compress children share a vertex");
                self.degree(self.node(left).level, shared) == 2
            }
            Formation::Rake { leaf, onto } => self.rake_legal(leaf, onto),
        }
    }

    fn rake_legal(&self, leaf: Slot, onto: Slot) -> bool {
        let Some(shared) = self.shared_vertex(leaf, onto) else {
            return false;
        };
        let n = self.node(leaf);
        let side = n.side_of(shared).expect("shared on leaf");
        if self.degree(n.level, n.boundary[1 - side]) != 1 {
            return false;
        }
        let ring = self.ring(n.level, shared).expect("ring");
        ring.len() >= 2 && Self::ring_succ(ring, n.keys[side]) == onto
    }

    // ---------------------------------------------------------------
    // Repair

    fn repair(&mut self) {
        let mut level = 0;
        while level < self.pending.len() {
            if !self.pending[level].is_empty() {
                self.repair_level(level);
            }
            level += 1;
        }
        debug_assert!(self.pending.iter().all(Pending::is_empty));
    }

    fn repair_level(&mut self, level: usize) {
        let mut orphans = std::mem::take(&mut self.pending[level].orphans);
        for &(p, pid) in &orphans {
            if self.alive(p) && self.node(p).id == pid {
                self.destroy(p);
            }
        }
        orphans.clear();
        self.pending[level].orphans = orphans;

        let mut changed = std::mem::take(&mut self.pending[level].changed);
        changed.sort_unstable();
        changed.dedup();
        let mut cands = std::mem::take(&mut self.cand_buf);
        cands.clear();
        for &(v, key) in &changed {
            let Some(ring) = self.ring(level as u32, v) else { continue };
            if ring.len() <= 2 {
                cands.extend(ring.values().copied());
            } else {
                cands.push(Self::ring_pred(ring, key));
                cands.push(Self::ring_succ(ring, key));
                if let Some(&s) = ring.get(&key) {
                    cands.push(s);
                }
            }
        }
        changed.clear();
        self.pending[level].changed = changed;
        cands.sort_unstable();
        cands.dedup();
        for &c in &cands {
            if self.alive(c) && self.up[c as usize][0] != NONE && !self.parent_valid(c) {
                let p = self.up[c as usize][0];
                self.destroy(p);
            }
        }

        let mut added = std::mem::take(&mut self.pending[level].added);
        cands.append(&mut added);
        self.pending[level].added = added;
        let mut freed = std::mem::take(&mut self.pending[level].freed);
        for &f in &freed {
            if self.alive(f) {
                cands.push(f);
                self.push_neighbors(f, &mut cands);
            }
        }
        freed.clear();
        let mut order = std::mem::take(&mut self.order_buf);
        order.clear();
        order.extend(cands.iter().filter(|&&c| self.alive(c)).map(|&c| (self.node(c).id, c)));
        order.sort_unstable();
        order.dedup();

        for &(_, x) in &order {
            if self.alive(x) && self.unconsumed(x) {
                self.try_move(x);
            }
        }
        for &(_, x) in &order {
            if self.alive(x) && self.up[x as usize][0] == NONE {
                if self.is_isolated(x) {
                    self.mark_root(x);
                } else {
                    self.lift(x);
                }
            }
        }
        // Lift releases during the scan only freed clusters that were
        // immediately recombined.
        self.pending[level].freed.clear();
        if self.pending[level].freed.capacity() < freed.capacity() {
            self.pending[level].freed = freed;
        }
        self.cand_buf = cands;
        self.order_buf = order;
    }

    fn push_neighbors(&self, s: Slot, out: &mut Vec<Slot>) {
        let n = self.node(s);
        for side in 0..2 {
            if let Some(ring) = self.ring(n.level, n.boundary[side]) {
                if ring.len() >= 2 {
                    out.push(Self::ring_pred(ring, n.keys[side]));
                    out.push(Self::ring_succ(ring, n.keys[side]));
                }
            }
        }
    }

    fn lift(&mut self, x: Slot) -> Slot {
        let n = self.node(x);
        let (level, boundary, keys, table, edges) = (n.level + 1, n.boundary, n.keys, n.table.clone(), n.edges);
        self.create(level, boundary, keys, Formation::Lift(x), table, edges)
    }

    // ---------------------------------------------------------------
    // Validation

    /// Recomputes a cluster's table from its children through `lookup`.
    pub(crate) fn recompute_with(&self, s: Slot, lookup: impl Fn(Slot) -> A::Table) -> A::Table {
        match self.node(s).formation {
            Formation::Base(e) => self.annotation.base(self.forest.edge(e).expect("live edge")),
            Formation::Lift(c) => lookup(c),
            _ => {
                let join = self.join_of(s).expect("combine");
                self.join_tables(&join, &lookup(join.left), &lookup(join.right))
            }
        }
    }

    /// Full structural audit against the definitions, recomputing
    /// everything from the forest.
    pub fn validate(&self) -> Result<(), InvariantViolation> {
        self.validate_forest()?;
        let slots: Vec<Slot> = self.live_slots().collect();
        if slots.len() != self.index.len() {
            return Err(violation("index", format!("{} live slots, {} indexed", slots.len(), self.index.len())));
        }
        let mut sizes = vec![0usize; self.level_sizes.len()];
        for &s in &slots {
            let n = self.node(s);
            if self.index.get(&n.id) != Some(&s) {
                return Err(violation("index", format!("{} not indexed at its slot", n.id)));
            }
            match sizes.get_mut(n.level as usize) {
                Some(c) => *c += 1,
                None => return Err(violation("levels", format!("{} above recorded levels", n.id))),
            }
        }
        if sizes != self.level_sizes {
            return Err(violation("levels", format!("level sizes {:?}, recorded {:?}", sizes, self.level_sizes)));
        }

        // Edge sets bottom-up.
        let mut order = slots.clone();
        order.sort_by_key(|&s| self.node(s).level);
        let mut edge_sets: HashMap<Slot, Vec<EdgeId>> = HashMap::new();
        for &s in &order {
            let n = self.node(s);
            let set = self.check_formation(s, &edge_sets)?;
            if set.len() != n.edges as usize {
                return Err(violation("edge-count", format!("{} stores {} edges, holds {}", n.id, n.edges, set.len())));
            }
            for side in 0..2 {
                let v = n.boundary[side];
                let key = set.iter().filter(|e| self.forest.edge(**e).is_some_and(|edge| edge.touches(v))).map(|e| e.0).min();
                if key != Some(n.keys[side]) {
                    return Err(violation("ring-key", format!("{} key at {} is {:?}, stored {}", n.id, v, key, n.keys[side])));
                }
            }
            edge_sets.insert(s, set);
        }

        self.validate_rings(&slots)?;
        self.validate_partition(&slots, &edge_sets)?;
        self.validate_moves(&slots)?;

        for &s in &slots {
            let target = (self.node(s).level / SKIP + 1) * SKIP;
            let mut want = self.up[s as usize][0];
            while want != NONE && self.node(want).level < target {
                want = self.up[want as usize][0];
            }
            if self.up[s as usize][1] != want {
                return Err(violation("jump", format!("{} jump pointer out of date", self.node(s).id)));
            }
        }
        for v in self.forest.vertices() {
            let b = self.forest.incident(v).next().map_or(NONE, |e| self.base_of[e.index()]);
            let want = [b, if b == NONE { NONE } else { self.up[b as usize][1] }];
            if self.vertex_base.get(v.index()).copied().unwrap_or([NONE; 2]) != want {
                return Err(violation("vertex-base", format!("vertex {v} has a stale base cluster")));
            }
        }

        let mut total = 0;
        for &s in &slots {
            let n = self.node(s);
            let is_root = self.up[s as usize][0] == NONE;
            if is_root != self.is_isolated(s) {
                return Err(violation("root", format!("{} parentless={} isolated={}", n.id, is_root, !is_root)));
            }
            if is_root != n.is_root {
                return Err(violation("root", format!("{} root flag out of date", n.id)));
            }
            if is_root {
                total += self.annotation.value(&n.table);
                let budget = level_budget(n.edges as usize);
                if n.level as usize + 1 > budget {
                    return Err(violation(
                        "level-budget",
                        format!("component of {} edges uses {} levels, budget {}", n.edges, n.level + 1, budget),
                    ));
                }
            }
        }
        if total != self.total {
            return Err(violation("total", format!("roots sum to {}, maintained {}", total, self.total)));
        }
        Ok(())
    }

    fn validate_forest(&self) -> Result<(), InvariantViolation> {
        let f = &self.forest;
        let ring_total: usize = f.vertices().map(|v| f.degree(v)).sum();
        if ring_total != 2 * f.edge_count() {
            return Err(violation("incidence", format!("ring lengths {} for {} edges", ring_total, f.edge_count())));
        }
        for edge in f.edges() {
            match self.base_of.get(edge.id.index()) {
                Some(&s) if s != NONE && self.alive(s) && self.node(s).formation == Formation::Base(edge.id) => {}
                _ => return Err(violation("base", format!("edge {} has no base cluster", edge.id))),
            }
        }
        Ok(())
    }

    /// Checks a cluster against its children and returns its edge set.
    fn check_formation(&self, s: Slot, sets: &HashMap<Slot, Vec<EdgeId>>) -> Result<Vec<EdgeId>, InvariantViolation> {
        let n = self.node(s);
        let child = |c: Slot| -> Result<&Vec<EdgeId>, InvariantViolation> {
            if !self.alive(c) || self.up[c as usize][0] != s {
                return Err(violation("parent-link", format!("{} has a child not pointing back", n.id)));
            }
            if self.node(c).level + 1 != n.level {
                return Err(violation("parent-link", format!("{} child level mismatch", n.id)));
            }
            sets.get(&c).ok_or_else(|| violation("parent-link", format!("{} child missing", n.id)))
        };
        let p = self.up[s as usize][0];
        if p != NONE && !self.alive(p) {
            return Err(violation("parent-link", format!("{} has a dead parent", n.id)));
        }
        let expected_table;
        let set = match n.formation {
            Formation::Base(e) => {
                let edge = self.forest.edge(e).ok_or_else(|| violation("base", format!("{} on dead edge", n.id)))?;
                if n.level != 0 || self.base_of[e.index()] != s {
                    return Err(violation("base", format!("{} misplaced", n.id)));
                }
                if (n.boundary[0], n.boundary[1]) != edge.endpoints {
                    return Err(violation("boundary", format!("{} boundary differs from its edge", n.id)));
                }
                expected_table = self.annotation.base(edge);
                vec![e]
            }
            Formation::Lift(c) => {
                let set = child(c)?.clone();
                let cn = self.node(c);
                if cn.boundary != n.boundary || cn.keys != n.keys {
                    return Err(violation("boundary", format!("lift {} differs from its child", n.id)));
                }
                expected_table = cn.table.clone();
                set
            }
            Formation::Rake { leaf: a, onto: b } | Formation::Compress { left: a, right: b } => {
                let mut set = child(a)?.clone();
                set.extend(child(b)?);
                set.sort();
                if set.windows(2).any(|w| w[0] == w[1]) {
                    return Err(violation("partition", format!("{} children overlap", n.id)));
                }
                let shared =
                    self.shared_vertex(a, b).ok_or_else(|| violation("boundary", format!("{} children do not share one vertex", n.id)))?;
                let (an, bn) = (self.node(a), self.node(b));
                let outer = |x: &Node<A::Table>| x.boundary[1 - x.side_of(shared).expect("shared")];
                let ok = if matches!(n.formation, Formation::Rake { .. }) {
                    n.boundary == bn.boundary
                } else {
                    n.boundary == [outer(an), outer(bn)]
                };
                if !ok {
                    return Err(violation("boundary", format!("{} boundary does not follow its children", n.id)));
                }
                expected_table = self.recompute_with(s, |c| self.node(c).table.clone());
                set
            }
        };
        if expected_table != n.table {
            return Err(violation("annotation", format!("{} stores {} but children give {}", n.id, n.table, expected_table)));
        }
        Ok(set)
    }

    fn validate_rings(&self, slots: &[Slot]) -> Result<(), InvariantViolation> {
        let mut expected: HashMap<(VertexId, usize), Ring> = HashMap::new();
        for &s in slots {
            let n = self.node(s);
            for side in 0..2 {
                let ring = expected.entry((n.boundary[side], n.level as usize)).or_default();
                if ring.insert(n.keys[side], s).is_some() {
                    return Err(violation("ring-key", format!("duplicate key {} at {}", n.keys[side], n.boundary[side])));
                }
            }
        }
        let mut stored = 0;
        for (v, levels) in self.rings.iter().enumerate() {
            if levels.last().is_some_and(BTreeMap::is_empty) {
                return Err(violation("rings", format!("vertex {v} keeps a trailing empty ring")));
            }
            for (l, ring) in levels.iter().enumerate().filter(|(_, r)| !r.is_empty()) {
                stored += 1;
                if expected.get(&(VertexId(v as u32), l)) != Some(ring) {
                    return Err(violation("rings", format!("ring of {v} at level {l} out of date")));
                }
            }
        }
        if stored != expected.len() {
            return Err(violation("rings", "a boundary vertex is missing from its ring"));
        }
        Ok(())
    }

    fn validate_partition(&self, slots: &[Slot], sets: &HashMap<Slot, Vec<EdgeId>>) -> Result<(), InvariantViolation> {
        let labels = self.forest.component_labels();
        let mut comp_root: HashMap<u32, Slot> = HashMap::new();
        for edge in self.forest.edges() {
            let mut s = self.base_of[edge.id.index()];
            let mut level = 0;
            loop {
                if self.node(s).level != level {
                    return Err(violation("partition", format!("edge {} skips level {}", edge.id, level)));
                }
                match self.parent_slot(s) {
                    Some(p) => s = p,
                    None => break,
                }
                level += 1;
            }
            let label = labels[edge.endpoints.0.index()];
            if *comp_root.entry(label).or_insert(s) != s {
                return Err(violation("partition", format!("component of edge {} has two roots", edge.id)));
            }
        }
        let distinct: std::collections::HashSet<Slot> = comp_root.values().copied().collect();
        if distinct.len() != comp_root.len() {
            return Err(violation("partition", "two components share a root"));
        }
        // Boundary invariant: a vertex shared by two clusters of a level is a
        // boundary vertex of both.
        let mut touching: HashMap<(u32, VertexId), Vec<Slot>> = HashMap::new();
        for &s in slots {
            let n = self.node(s);
            let mut verts: Vec<VertexId> = Vec::new();
            for e in &sets[&s] {
                let (a, b) = self.forest.edge(*e).expect("live").endpoints;
                verts.push(a);
                verts.push(b);
            }
            verts.sort();
            verts.dedup();
            for v in verts {
                touching.entry((n.level, v)).or_default().push(s);
            }
        }
        for ((level, v), list) in &touching {
            if list.len() >= 2 {
                for &s in list {
                    if self.node(s).side_of(*v).is_none() {
                        return Err(violation(
                            "boundary",
                            format!("vertex {} shared at level {} but interior to {}", v, level, self.node(s).id),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn validate_moves(&self, slots: &[Slot]) -> Result<(), InvariantViolation> {
        for &s in slots {
            let n = self.node(s);
            if let Some(p) = self.parent_slot(s) {
                if !self.parent_valid(s) {
                    return Err(violation("legality", format!("{} formation of {} no longer legal", self.node(p).id, n.id)));
                }
            }
            if !self.unconsumed(s) || self.is_isolated(s) {
                continue;
            }
            for side in 0..2 {
                let ring = self.ring(n.level, n.boundary[side]).expect("ring");
                if ring.len() == 2 {
                    let y = ring.values().copied().find(|&y| y != s).expect("pair");
                    if self.unconsumed(y) {
                        return Err(violation("maximality", format!("{} and {} could still compress", n.id, self.node(y).id)));
                    }
                }
            }
            if let Some(attach) = self.leaf_attachment(s) {
                let ring = self.ring(n.level, n.boundary[attach]).expect("ring");
                let y = Self::ring_succ(ring, n.keys[attach]);
                if self.unconsumed(y) {
                    return Err(violation("maximality", format!("{} could still rake onto {}", n.id, self.node(y).id)));
                }
            }
        }
        Ok(())
    }
}
