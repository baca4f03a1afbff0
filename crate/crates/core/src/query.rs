//! Matching queries over a [`TopForest`] annotated with [`Matching`].

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::annot::{combine_terms, slack_violation, table_best, table_swap, CombineKind, MatchTable, MatchValue, Matching, State};
use crate::forest::{EdgeId, VertexId};
use crate::toptree::{InvariantViolation, JoinKind, Slot, TopForest};

pub type MatchingForest = TopForest<Matching>;

/// A subset of the four boundary states of a cluster.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct ChoiceSet(u8);

impl ChoiceSet {
    pub const EMPTY: ChoiceSet = ChoiceSet(0);

    pub fn only(s: State) -> Self {
        ChoiceSet(1 << s.index())
    }

    pub fn insert(&mut self, s: State) {
        self.0 |= 1 << s.index();
    }

    pub fn contains(self, s: State) -> bool {
        self.0 & (1 << s.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn states(self) -> impl Iterator<Item = State> {
        State::ALL.into_iter().filter(move |&s| self.contains(s))
    }

    fn swapped(self) -> Self {
        let mut out = ChoiceSet::EMPTY;
        for s in self.states() {
            out.insert(s.swap());
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeStatus {
    Matched,
    Unmatched,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EdgeConstraint {
    pub edge: EdgeId,
    pub status: EdgeStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Tristate {
    Matched,
    Unmatched,
    Infeasible,
}

impl fmt::Display for Tristate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tristate::Matched => "yes",
            Tristate::Unmatched => "no",
            Tristate::Infeasible => "infeasible",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("NoSuchEdge")]
    NoSuchEdge,
    #[error("CrossComponent")]
    CrossComponent,
}

impl QueryError {
    pub fn code(&self) -> &'static str {
        match self {
            QueryError::NoSuchEdge => "NoSuchEdge",
            QueryError::CrossComponent => "CrossComponent",
        }
    }
}

impl TopForest<Matching> {
    /// Maximum matching value of the component of `v`; zero when isolated.
    pub fn matching_cardinality(&self, v: VertexId) -> MatchValue {
        match self.root_slot(v) {
            Some(r) => table_best(&self.node(r).table),
            None => MatchValue::ZERO,
        }
    }

    pub fn total_cardinality(&self) -> MatchValue {
        MatchValue::new(self.total_value())
    }

    /// Whether some maximum matching of `e`'s component contains `e`.
    pub fn edge_in_some_maximum(&self, e: EdgeId) -> Result<bool, QueryError> {
        let path = self.ancestor_slots(e).map_err(|_| QueryError::NoSuchEdge)?;
        let mut chosen = ChoiceSet::only(State::BB);
        for pair in path.windows(2) {
            chosen = self.lift_choice(pair[0], pair[1], chosen);
            if chosen.is_empty() {
                return Ok(false);
            }
        }
        let root = &self.node(*path.last().expect("non-empty path")).table;
        let best = table_best(root);
        Ok(chosen.states().any(|s| root[s] == best))
    }

    /// States of `parent` whose optimum is reached through one of the
    /// `chosen` states of `child`.
    fn lift_choice(&self, child: Slot, parent: Slot, chosen: ChoiceSet) -> ChoiceSet {
        let Some(join) = self.join_of(parent) else {
            return chosen;
        };
        let (ln, rn) = (&self.node(join.left).table, &self.node(join.right).table);
        let pt = &self.node(parent).table;
        let child_is_left = join.left == child;
        let kind = match join.kind {
            JoinKind::Rake => CombineKind::Rake,
            JoinKind::Compress => CombineKind::Compress,
        };
        // Work in oriented coordinates.
        let orient = |t: &MatchTable, rev: bool| if rev { table_swap(t) } else { *t };
        let l = orient(ln, join.left_reversed);
        let r = orient(rn, join.right_reversed);
        let p = orient(pt, join.result_reversed);
        let mine = if child_is_left {
            if join.left_reversed {
                chosen.swapped()
            } else {
                chosen
            }
        } else if join.right_reversed {
            chosen.swapped()
        } else {
            chosen
        };
        let mut out = ChoiceSet::EMPTY;
        for (ls, rs, res) in combine_terms(kind) {
            let mine_state = if child_is_left { ls } else { rs };
            if !mine.contains(mine_state) {
                continue;
            }
            let term = l[ls] + r[rs];
            if !term.is_null() && term == p[res] {
                out.insert(res);
            }
        }
        if join.result_reversed {
            out.swapped()
        } else {
            out
        }
    }

    /// Answers whether `e` is matched in the maximum matchings that obey
    /// every constraint.
    pub fn edge_matched_given(&self, constraints: &[EdgeConstraint], e: EdgeId) -> Result<Tristate, QueryError> {
        let root = self.edge_root_slot(e).ok_or(QueryError::NoSuchEdge)?;
        let mut forced: BTreeMap<EdgeId, (bool, bool)> = BTreeMap::new();
        for c in constraints {
            let r = self.edge_root_slot(c.edge).ok_or(QueryError::NoSuchEdge)?;
            if r != root {
                return Err(QueryError::CrossComponent);
            }
            let entry = forced.entry(c.edge).or_insert((true, true));
            match c.status {
                EdgeStatus::Matched => entry.0 = false,
                EdgeStatus::Unmatched => entry.1 = false,
            }
        }
        let constrained = self.constrained_root(root, &forced);
        let best = table_best(&constrained);
        if best.is_null() {
            return Ok(Tristate::Infeasible);
        }
        forced.entry(e).or_insert((true, true)).0 = false;
        let with_e = table_best(&self.constrained_root(root, &forced));
        Ok(if with_e == best { Tristate::Matched } else { Tristate::Unmatched })
    }

    /// Root table recomputed with base tables restricted per edge to
    /// (may be unmatched, may be matched).
    fn constrained_root(&self, root: Slot, forced: &BTreeMap<EdgeId, (bool, bool)>) -> MatchTable {
        let mut tables: HashMap<Slot, MatchTable> = HashMap::new();
        let mut by_level: BTreeMap<u32, Vec<Slot>> = BTreeMap::new();
        for (&edge, &(white_ok, black_ok)) in forced {
            let path = self.ancestor_slots(edge).expect("checked edge");
            let base = path[0];
            let t = self.node(base).table.restricted(|s| match s {
                State::WW => white_ok,
                State::BB => black_ok,
                _ => false,
            });
            tables.insert(base, t);
            for &s in &path[1..] {
                by_level.entry(self.node(s).level).or_default().push(s);
            }
        }
        for (_, mut slots) in by_level {
            slots.sort_unstable();
            slots.dedup();
            for s in slots {
                let t = self.recompute_with(s, |c| tables.get(&c).copied().unwrap_or(self.node(c).table));
                tables.insert(s, t);
            }
        }
        tables.get(&root).copied().unwrap_or(self.node(root).table)
    }

    /// Structural audit plus the slack bounds on every stored table.
    pub fn audit(&self) -> Result<(), InvariantViolation> {
        self.validate()?;
        let weighted = self.annotation().weighted;
        for c in self.clusters() {
            if let Some(what) = slack_violation(&c.table, weighted) {
                return Err(InvariantViolation { invariant: "slack", detail: format!("{} table {}: {}", c.id, c.table, what) });
            }
        }
        Ok(())
    }
}
